"""Slotted simulator: one replication of a scenario in ``cidp`` or ``baseline`` mode.

Per slot: link activity from the fading stream, arrivals, routing,
real-time hop handling, emissions and the eavesdropper's detections.

cidp
    Bulk flows are routed by drift-plus-penalty with cover traffic on every
    idle active link.  Real-time flows use a reserved channel along their
    reference shortest path, one hop per slot, and every hop goes through the
    barrier filter.  Emissions leave through the SLTM schedule.
baseline
    Every packet waits in a per-node FIFO and follows the shortest path of
    the current active graph.  A node that sends no data in a slot emits one
    dummy on a random active link.  Static beam, no hold delays.

Random streams are labelled per concern and replication, so both modes see
the same placement, fading, arrivals and hop delays.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .adversary import inband_gain, infer_anonymity, node_detection_probs
from .channel_phy import Channel, rician_draw
from .core_model import TraceEvent, config_hash, make_rng
from .jitter_racbf import (BarrierViolation, DisturbanceBoundExceeded, default_t_align,
                           default_v_max, filter_packet, sample_hop_delays)
from .metrics_reporting import MetricsLedger
from .router_lyapunov import QueueState, maxweight_schedule
from .sltm_optimizer import design_for

MODES = ("cidp", "baseline")
_UNREACHABLE = np.iinfo(np.int64).max
_FADING_CHUNK = 500


class SimulationError(RuntimeError):
    pass


@dataclass
class NetworkState:
    positions: np.ndarray
    reference: np.ndarray
    backlog: np.ndarray      # (nodes, flows) queued data packets
    in_flight: np.ndarray    # per flow, reserved-channel packets not yet delivered
    slot: int = 0


@dataclass
class SimulationRun:
    cfg: object
    mode: str
    replication: int
    trace: list
    ledger: MetricsLedger
    final_state: NetworkState
    backlog_totals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    arrived: np.ndarray = field(default_factory=lambda: np.zeros(0))
    delivered: np.ndarray = field(default_factory=lambda: np.zeros(0))


# ---------------------------------------------------------------- graphs


def bfs_hops(adj: np.ndarray, dst: int) -> np.ndarray:
    """Hop count from every node to ``dst`` along directed edges ``adj[i, j]``."""
    n = adj.shape[0]
    hops = np.full(n, _UNREACHABLE, dtype=np.int64)
    hops[dst] = 0
    frontier = [dst]
    radj = adj.T
    while frontier:
        nxt = []
        for v in frontier:
            for u in np.flatnonzero(radj[v]):
                if hops[u] == _UNREACHABLE:
                    hops[u] = hops[v] + 1
                    nxt.append(int(u))
        frontier = nxt
    return hops


def shortest_path_route(adj: np.ndarray, src: int, dst: int, hops: np.ndarray | None = None):
    """Hop-minimal next hop from ``src`` toward ``dst`` (lowest id on ties), or ``None``."""
    if src == dst:
        return None
    if hops is None:
        hops = bfs_hops(adj, dst)
    if hops[src] == _UNREACHABLE:
        return None
    cand = np.flatnonzero(adj[src] & (hops == hops[src] - 1))
    return int(cand[0]) if cand.size else None


def shortest_path(adj: np.ndarray, src: int, dst: int):
    hops = bfs_hops(adj, dst)
    if hops[src] == _UNREACHABLE:
        return None
    path = [src]
    while path[-1] != dst:
        path.append(shortest_path_route(adj, path[-1], dst, hops))
    return path


def place_nodes(cfg, replication: int, max_tries: int = 1000):
    """Positions for a replication: configured, or uniform until every flow is routable."""
    net = cfg.network
    if net.positions_m is not None:
        pos = np.asarray(net.positions_m, dtype=float)
        ref = _reference(net, pos)
        if not _routable(cfg, ref):
            raise SimulationError("configured positions leave a flow without a reference path")
        return pos, ref, 1
    rng = make_rng(cfg.sim.seed, f"placement/{replication}")
    for k in range(1, max_tries + 1):
        pos = rng.random((net.n_nodes, 2)) * net.area_m
        ref = _reference(net, pos)
        if _routable(cfg, ref):
            return pos, ref, k
    raise SimulationError(f"no routable placement after {max_tries} draws")


def _reference(net, pos):
    ref = Channel(net, pos).reference_links()
    np.fill_diagonal(ref, False)
    return ref


def _routable(cfg, ref) -> bool:
    return all(bfs_hops(ref, fl.dst)[fl.src] != _UNREACHABLE for fl in cfg.flows)


def eve_snr_db(cfg, positions: np.ndarray) -> np.ndarray:
    """Per-node SNR at the eavesdropper (mean channel, through the reference sidelobe)."""
    net, adv = cfg.network, cfg.adversary
    eve = (np.asarray(adv.eve_position_m, dtype=float) if adv.eve_position_m is not None
           else np.full(2, net.area_m / 2.0))
    d = np.maximum(np.hypot(*(positions - eve).T), 1.0)
    return (net.tx_power_dbm + net.ref_gain_db - 10.0 * net.pathloss_exponent * np.log10(d)
            - net.noise_dbm + adv.eve_offset_db)


# ---------------------------------------------------------------- run


class _Trace:
    """Slot-ordered event sink; events for future slots wait in ``pending``."""

    def __init__(self, on: bool):
        self.on = on
        self.events: list = []
        self.pending: dict = {}

    def add(self, slot, kind, flow, node, **payload):
        if self.on:
            self.events.append(TraceEvent(int(slot), kind, int(flow), int(node), payload))

    def later(self, slot, kind, flow, node, **payload):
        if self.on:
            self.pending.setdefault(int(slot), []).append(
                TraceEvent(int(slot), kind, int(flow), int(node), payload))

    def flush(self, slot):
        if self.on and slot in self.pending:
            self.events.extend(self.pending.pop(slot))

    def flush_all(self):
        if self.on:
            for s in sorted(self.pending):
                self.events.extend(self.pending.pop(s))


def run(cfg, mode: str, replication: int = 0, record_trace: bool = True,
        check_conservation: bool = False, design=None) -> SimulationRun:
    """Simulate ``cfg.sim.n_slots`` slots; deterministic in (cfg, mode, seed, replication)."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    net, ctl, sim = cfg.network, cfg.control, cfg.sim
    N, F, S = net.n_nodes, len(cfg.flows), sim.n_slots
    slot_ms = sim.slot_ms
    ledger = MetricsLedger(mode, config_hash(cfg))
    tr = _Trace(record_trace)
    pos, ref, tries = place_nodes(cfg, replication)
    state = NetworkState(pos, ref, np.zeros((N, F), dtype=np.int64), np.zeros(F, dtype=np.int64))
    if S == 0:
        return SimulationRun(cfg, mode, replication, [], ledger, state)

    def rng(label):
        return make_rng(sim.seed, f"{label}/{replication}")

    flows = cfg.flows
    dst = np.array([fl.dst for fl in flows], dtype=np.int64)
    rt = [f for f, fl in enumerate(flows) if fl.realtime]
    bulk = [f for f, fl in enumerate(flows) if not fl.realtime]
    dmax, alpha = ctl.dmax_ms, ctl.alpha

    # reserved real-time paths and per-flow hop budgets
    paths, t_align, v_max = {}, {}, {}
    for f in rt:
        p = shortest_path(ref, flows[f].src, flows[f].dst)
        paths[f] = p
        H = len(p) - 1
        t_align[f] = ctl.t_align_ms if ctl.t_align_ms is not None else default_t_align(dmax, H)
        v_max[f] = ctl.v_max_ms if ctl.v_max_ms is not None else default_v_max(t_align[f], dmax, alpha, H)

    # arrivals: real-time phases, then bulk Poisson counts
    ra = rng("arrivals")
    horizon = S * slot_ms
    gen_ms = {}
    for f in rt:
        per = flows[f].period_ms
        t0 = ra.random() * per
        gen_ms[f] = t0 + per * np.arange(int(np.ceil((horizon - t0) / per)))
        gen_ms[f] = gen_ms[f][gen_ms[f] < horizon]
    lam = np.array([flows[f].rate_pkts_per_s * slot_ms / 1000.0 for f in bulk])
    bulk_counts = ra.poisson(lam, size=(S, len(bulk))) if bulk else np.zeros((S, 0), dtype=np.int64)
    gen_slot = {f: np.floor(gen_ms[f] / slot_ms).astype(np.int64) for f in rt}
    rt_by_slot: dict[int, list] = {}
    for f in rt:
        for k, s in enumerate(gen_slot[f]):
            rt_by_slot.setdefault(int(s), []).append((f, k))

    # per-packet hop delays, one row per packet, enough columns for any path
    rd = rng("disturbance")
    vdraw = {f: sample_hop_delays(rd, len(gen_ms[f]) * (N - 1), v_max[f], t_align[f]).reshape(-1, N - 1)
             for f in rt}

    # fading -> activity, drawn in fixed-size chunks
    rf = rng("fading")
    active = np.empty((S, N, N), dtype=bool)
    ch = Channel(net, pos)
    for a in range(0, S, _FADING_CHUNK):
        b = min(S, a + _FADING_CHUNK)
        h = rician_draw(rf, net.rician_k_db, (b - a, N, N))
        active[a:b] = ch.snr_db(h) >= net.gamma0_db
    idx = np.arange(N)
    active[:, idx, idx] = False

    # adversary
    design = design if design is not None else (design_for(cfg)[1] if mode == "cidp" else None)
    adv = cfg.adversary
    if mode == "cidp":
        gain = inband_gain(cfg, "cidp_sltm", design.schedule)
        ledger.extra["e_phy_bits"] = float(design.e_phy_bits)
        ledger.extra["eta_star"] = float(design.eta_star)
    else:
        gain = inband_gain(cfg, "static_baseline")
    p_node = node_detection_probs(eve_snr_db(cfg, pos), adv.window_samples, adv.pfa, gain)
    ro = rng("observation")
    detected = np.zeros((S, N, N), dtype=bool)

    arrived = np.zeros(F, dtype=np.int64)
    delivered = np.zeros(F, dtype=np.int64)
    deliveries = {f: [] for f in rt}  # (time_ms, latency_ms)
    send_slots = {f: [] for f in rt}
    backlog_totals = np.zeros(S, dtype=np.int64)
    dummies = 0
    cap = int(net.link_capacity)

    if mode == "cidp":
        Q = np.zeros((N, F), dtype=np.int64)
        eligible = np.zeros(F, dtype=bool)
        eligible[bulk] = True
        rt_emit: dict[int, list] = {}
        rt_done: dict[int, list] = {}
        hb_all, ha_all = [], []
    else:
        fifo = [deque() for _ in range(N)]
        fifo_count = np.zeros((N, F), dtype=np.int64)
        req = rng("equalization")

    for t in range(S):
        tr.flush(t)
        A = active[t]
        emit = np.zeros((N, N), dtype=bool)
        # arrivals
        for k, f in enumerate(bulk):
            c = int(bulk_counts[t, k])
            if c:
                arrived[f] += c
                tr.add(t, "arrival", f, flows[f].src, count=c)
                if mode == "cidp":
                    Q[flows[f].src, f] += c
                else:
                    q = fifo[flows[f].src]
                    for _ in range(c):
                        q.append((f, -1, 0.0, 0.0, 0))
                    fifo_count[flows[f].src, f] += c
        for f, k in rt_by_slot.get(t, ()):
            arrived[f] += 1
            tr.add(t, "arrival", f, flows[f].src, seq=k)
            if mode == "cidp":
                _launch_rt(f, k, t, paths[f], vdraw[f][k], t_align[f], dmax, alpha, gen_ms[f][k],
                           rt_emit, rt_done, hb_all, ha_all, tr, state)
                send_slots[f].append(t)
            else:
                fifo[flows[f].src].append((f, k, float(gen_ms[f][k]), 0.0, 0))
                fifo_count[flows[f].src, f] += 1
        tr.flush(t)  # first-hop events of packets launched this slot

        if mode == "cidp":
            # reserved real-time hops of this slot
            rt_links = rt_emit.pop(t, ())
            for (i, j) in rt_links:
                emit[i, j] = True
            if ctl.V > 0:
                # cover traffic on the idle reserved channel of every reference link
                idle = ref.copy()
                for (i, j) in rt_links:
                    idle[i, j] = False
                emit |= idle
                dummies += int(idle.sum())
                if tr.on:
                    for i in np.flatnonzero(idle.any(axis=1)):
                        tr.add(t, "dummy", -1, i, to=np.flatnonzero(idle[i]).tolist(), channel="reserved")
            for f, t_ms, lat in rt_done.pop(t, ()):
                delivered[f] += 1
                state.in_flight[f] -= 1
                deliveries[f].append((t_ms, lat))
            li, lj = np.nonzero(A)
            caps = np.full(len(li), cap, dtype=np.int64)
            sched = maxweight_schedule(Q, li, lj, caps, eligible)
            used = np.zeros(len(li), dtype=np.int64)
            moves = []
            for l, f, c in sched:
                i, j = int(li[l]), int(lj[l])
                Q[i, f] -= c
                moves.append((i, j, f, c))
                used[l] += c
                emit[i, j] = True
                tr.add(t, "forward", f, i, to=j, count=c)
            for i, j, f, c in moves:
                if j == dst[f]:
                    delivered[f] += c
                    tr.add(t, "deliver", f, j, count=c)
                else:
                    Q[j, f] += c
            if ctl.V > 0:
                free = caps - used
                on = free > 0
                emit[li[on], lj[on]] = True
                dummies += int(free[on].sum())
                if tr.on:
                    for i in np.unique(li[on]):
                        tr.add(t, "dummy", -1, i, to=[int(j) for j in lj[on][li[on] == i]], channel="shared")
            backlog_totals[t] = Q.sum() + state.in_flight.sum()
        else:
            dummies += _baseline_slot(t, A, fifo, fifo_count, flows, dst, cap, vdraw, slot_ms, emit,
                                      delivered, deliveries, send_slots, req, tr)
            backlog_totals[t] = fifo_count.sum()

        # eavesdropper: every emission detected independently at its node's probability
        u = ro.random((N, N))
        detected[t] = emit & (u < p_node[:, None])

        if check_conservation:
            held = Q.sum(axis=0) + state.in_flight if mode == "cidp" else fifo_count.sum(axis=0)
            if not np.array_equal(arrived, delivered + held):
                raise SimulationError(f"conservation broken at slot {t}")

    tr.flush_all()
    held = Q.sum(axis=0) + state.in_flight if mode == "cidp" else fifo_count.sum(axis=0)
    state.backlog = Q if mode == "cidp" else fifo_count
    state.slot = S

    # ledger
    for f in rt:
        dl = sorted(deliveries[f])
        times = np.array([d[0] for d in dl])
        ledger.latencies_ms[f] = [float(d[1]) for d in dl]
        if len(times) > 1:
            ledger.jitter_samples_ms[f] = np.abs(np.diff(times) - flows[f].period_ms).tolist()
        else:
            ledger.jitter_samples_ms[f] = []
        ledger.rt_delivered += len(dl)
    ledger.delivered_data_pkts = int(delivered.sum())
    ledger.delivered_dummy_pkts = int(dummies)
    ledger.nominal_pkts = int(arrived.sum())
    if mode == "cidp":
        ledger.barrier_h_before = hb_all
        ledger.barrier_h_after = ha_all
    ledger.extra.update({
        "replication": replication,
        "placement_draws": tries,
        "rt_hops": {str(f): len(paths[f]) - 1 for f in rt} if mode == "cidp" else {},
        "conservation_ok": bool(np.array_equal(arrived, delivered + held)),
        "eve_gain": float(gain),
    })
    # anonymity
    receivers = {f: int(dst[f]) for f in rt}
    obs = {}
    for r in set(receivers.values()):
        hops = bfs_hops(ref, r)
        nh = ref & (hops[None, :] == hops[:, None] - 1)
        obs[r] = (detected & nh[None]).any(axis=2)
    emitted_nodes = np.flatnonzero(detected.any(axis=(0, 2)))
    post = infer_anonymity(obs, {f: np.array(send_slots[f]) for f in rt}, receivers, p_node,
                           ctl.epoch_slots, adv.candidates, emitted_nodes)
    ledger.anonymity_set_sizes = [p.effective_set_size for p in post]
    return SimulationRun(cfg, mode, replication, tr.events, ledger, state, backlog_totals,
                         arrived, delivered)


def _launch_rt(f, k, t, path, v, t_align, dmax, alpha, t_gen, rt_emit, rt_done, hb_all, ha_all,
               tr, state):
    """Filter one real-time packet along its reserved path and schedule its hops."""
    H = len(path) - 1
    try:
        delta, d_before, d_after = filter_packet(v[:H], t_align, dmax, alpha, f)
    except (BarrierViolation, DisturbanceBoundExceeded) as exc:
        tr.add(t, "barrier_violation", f, path[0], seq=k, reason=str(exc))
        raise SimulationError(f"barrier filter failed for flow {f}, packet {k}: {exc}") from exc
    hb = dmax - d_before
    ha = dmax - d_after
    hb_all.extend(hb.tolist())
    ha_all.extend(ha.tolist())
    for h in range(H):
        rt_emit.setdefault(t + h, []).append((path[h], path[h + 1]))
        if tr.on:
            tr.later(t + h, "hold", f, path[h], seq=k, hop=h, v_ms=float(v[h]), delta_ms=float(delta[h]),
                     h_before=float(hb[h]), h_after=float(ha[h]))
            tr.later(t + h, "forward", f, path[h], to=path[h + 1], count=1, seq=k)
    latency = H * t_align + float(d_after[-1])
    rt_done.setdefault(t + H - 1, []).append((f, t_gen + latency, latency))
    state.in_flight[f] += 1
    tr.later(t + H - 1, "deliver", f, path[-1], seq=k, latency_ms=latency)


def _baseline_slot(t, A, fifo, fifo_count, flows, dst, cap, vdraw, slot_ms, emit, delivered,
                   deliveries, send_slots, req, tr) -> int:
    """FIFO shortest-path forwarding plus one-dummy equalization; returns dummies sent."""
    N = A.shape[0]
    hop_cache = {}
    incoming = []
    sent_any = np.zeros(N, dtype=bool)
    for i in range(N):
        q = fifo[i]
        if not q:
            continue
        out_links = int(A[i].sum())
        if out_links == 0:
            continue
        load = {}
        keep = deque()
        saturated = 0
        while q:
            pkt = q.popleft()
            if saturated >= out_links:
                keep.append(pkt)
                continue
            f, k, g_ms, vs, nh_count = pkt
            d = int(dst[f])
            if d not in hop_cache:
                hop_cache[d] = bfs_hops(A, d)
            j = shortest_path_route(A, i, d, hop_cache[d])
            if j is None or load.get(j, 0) >= cap:
                keep.append(pkt)
                continue
            load[j] = load.get(j, 0) + 1
            if load[j] == cap:
                saturated += 1
            fifo_count[i, f] -= 1
            emit[i, j] = True
            sent_any[i] = True
            if k >= 0:
                # changing active graphs can stretch a route past N-1 hops; wrap the row
                row = vdraw[f][k]
                vs += float(row[nh_count % row.size])
                if i == flows[f].src and nh_count == 0:
                    send_slots[f].append(t)
            tr.add(t, "forward", f, i, to=j, count=1, **({"seq": k} if k >= 0 else {}))
            if j == d:
                delivered[f] += 1
                if k >= 0:
                    # leaves at the end of the delivery slot, plus the raw hop delays
                    t_ms = (t + 1) * slot_ms + vs
                    deliveries[f].append((t_ms, t_ms - g_ms))
                    lat = t_ms - g_ms
                    tr.add(t, "deliver", f, j, seq=k, latency_ms=lat)
                else:
                    tr.add(t, "deliver", f, j, count=1)
            else:
                incoming.append((j, (f, k, g_ms, vs, nh_count + 1)))
        fifo[i] = keep
    for j, pkt in incoming:
        fifo[j].append(pkt)
        fifo_count[j, pkt[0]] += 1
    # equalization: idle transmitters emit one dummy on a random active link
    u = req.random(N)
    n = 0
    for i in range(N):
        if sent_any[i]:
            continue
        outs = np.flatnonzero(A[i])
        if outs.size == 0:
            continue
        j = int(outs[min(int(u[i] * outs.size), outs.size - 1)])
        emit[i, j] = True
        n += 1
        tr.add(t, "dummy", -1, i, to=[j])
    return n
