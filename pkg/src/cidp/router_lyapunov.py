"""Per-slot drift-plus-penalty routing with cover-traffic injection.

With link-separable capacities the per-slot linear program

    min_x  -sum_{l,f} w_l^f x_l^f  -  V * H(x, y)

(``w`` the differential backlog, ``H`` the emitted entropy, one
``h_dummy`` bit per emitted packet) splits by link: each capacity unit
either carries the flow of largest positive weight or, when ``V > 0``, a
dummy.  The only coupling left is a transmitter's own backlog shared by its
outgoing links; where per-link choices over-draw a backlog the node's
allocation is re-solved exactly as an integer transportation problem.

The drift term's penalty ``-R_phy(t)`` is taken to be the realised
``H(t)``, i.e. ``R_phy`` is the per-slot entropy the decision injects.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .kernels import link_argmax


class InfeasibleDecision(RuntimeError):
    pass


@dataclass
class QueueState:
    """Backlog ``Q[i, f]`` of flow ``f`` at node ``i``; destinations hold nothing."""

    backlog: np.ndarray
    dst: tuple[int, ...]
    slot: int = 0

    @classmethod
    def empty(cls, n_nodes: int, dst) -> "QueueState":
        return cls(np.zeros((n_nodes, len(dst)), dtype=np.int64), tuple(dst))

    def get(self, node: int, flow: int) -> int:
        return int(self.backlog[node, flow])

    def total(self) -> int:
        return int(self.backlog.sum())

    def copy(self) -> "QueueState":
        return QueueState(self.backlog.copy(), self.dst, self.slot)


@dataclass
class RoutingDecision:
    transmissions: list = field(default_factory=list)  # ((i, j), flow, count)
    dummies: list = field(default_factory=list)        # ((i, j), count)
    entropy_injected: float = 0.0

    def data_count(self) -> int:
        return sum(c for _, _, c in self.transmissions)

    def dummy_count(self) -> int:
        return sum(c for _, c in self.dummies)


def link_weight(q: QueueState, link, flow: int) -> int:
    i, j = link
    return q.get(i, flow) - q.get(j, flow)


def _node_assignment(Q, i, out_links, lj, caps, eligible):
    """Exact max-weight allocation of node ``i``'s backlog over its outgoing links."""
    rows = []  # link index per capacity unit
    for l in out_links:
        rows.extend([l] * int(caps[l]))
    if not rows:
        return {}
    cols = []  # flow per packet unit
    for f in np.flatnonzero(eligible):
        cols.extend([int(f)] * int(min(Q[i, f], len(rows))))
    if not cols:
        return {}
    P = np.zeros((len(rows), len(cols)))
    for r, l in enumerate(rows):
        for c, f in enumerate(cols):
            P[r, c] = max(Q[i, f] - Q[lj[l], f], 0)
    rr, cc = linear_sum_assignment(P, maximize=True)
    alloc: dict[tuple[int, int], int] = {}
    for r, c in zip(rr, cc):
        if P[r, c] > 0:
            key = (rows[r], cols[c])
            alloc[key] = alloc.get(key, 0) + 1
    return alloc


def maxweight_schedule(Q: np.ndarray, li: np.ndarray, lj: np.ndarray, caps: np.ndarray,
                       eligible: np.ndarray | None = None):
    """Array form of the data part of :func:`decide_slot`.

    Returns a list of ``(link_index, flow, count)`` sorted by link index.
    """
    L = len(li)
    if eligible is None:
        eligible = np.ones(Q.shape[1], dtype=bool)
    if L == 0:
        return []
    best, _ = link_argmax(Q, li, lj, eligible)
    x = np.where(best >= 0, np.minimum(caps, Q[li, np.maximum(best, 0)]), 0)
    out = {}
    over_nodes = set()
    # per (node, flow) demand against backlog
    demand: dict[tuple[int, int], int] = {}
    for l in np.flatnonzero(x > 0):
        key = (int(li[l]), int(best[l]))
        demand[key] = demand.get(key, 0) + int(x[l])
    for (i, f), dmd in demand.items():
        if dmd > Q[i, f]:
            over_nodes.add(i)
    for l in np.flatnonzero(x > 0):
        if int(li[l]) not in over_nodes:
            out[int(l)] = (int(best[l]), int(x[l]))
    result = [(l, f, c) for l, (f, c) in out.items()]
    for i in sorted(over_nodes):
        out_links = [int(l) for l in np.flatnonzero(li == i)]
        for (l, f), c in _node_assignment(Q, i, out_links, lj, caps, eligible).items():
            result.append((l, f, c))
    result.sort()
    return result


def decide_slot(q: QueueState, active_links, capacities, V: float, h_dummy: float = 1.0,
                e_phy_rate: float = 0.0, eligible=None) -> RoutingDecision:
    """Drift-plus-penalty decision for one slot.

    ``active_links`` is an iterable of ``(i, j)``; ``capacities`` maps a link to
    its packet capacity (a scalar applies to every link).
    """
    links = sorted({(int(i), int(j)) for i, j in active_links})
    if np.isscalar(capacities):
        caps = np.full(len(links), int(capacities), dtype=np.int64)
    else:
        caps = np.array([int(capacities[l]) for l in links], dtype=np.int64)
    if np.any(caps < 0):
        raise ValueError("capacities must be non-negative")
    li = np.array([l[0] for l in links], dtype=np.int64)
    lj = np.array([l[1] for l in links], dtype=np.int64)
    elig = None if eligible is None else np.asarray(eligible, dtype=bool)
    sched = maxweight_schedule(q.backlog, li, lj, caps, elig)
    used = np.zeros(len(links), dtype=np.int64)
    d = RoutingDecision()
    for l, f, c in sched:
        d.transmissions.append((links[l], f, c))
        used[l] += c
    if V > 0:
        for l, link in enumerate(links):
            r = int(caps[l] - used[l])
            if r > 0:
                d.dummies.append((link, r))
    d.entropy_injected = (d.data_count() + d.dummy_count()) * h_dummy + e_phy_rate
    return d


def decision_objective(q: QueueState, d: RoutingDecision, V: float, h_dummy: float = 1.0) -> float:
    """``-sum w x - V H`` without the constant PHY entropy term."""
    drift = -sum(link_weight(q, link, f) * c for link, f, c in d.transmissions)
    return drift - V * h_dummy * (d.data_count() + d.dummy_count())


def apply_decision(q: QueueState, d: RoutingDecision, arrivals=None):
    """Advance the queues one slot.  Returns ``(new_state, delivered_per_flow)``.

    ``arrivals`` maps ``(node, flow)`` to a packet count.  Dummies never enter
    data queues.
    """
    Q = q.backlog.copy()
    if arrivals:
        for (i, f), c in arrivals.items():
            Q[i, f] += c
    delivered = np.zeros(Q.shape[1], dtype=np.int64)
    for (i, j), f, c in d.transmissions:
        if c < 0 or Q[i, f] < c:
            raise InfeasibleDecision(f"flow {f} at node {i}: departs {c} with backlog {Q[i, f]}")
        Q[i, f] -= c
        if j == q.dst[f]:
            delivered[f] += c
        else:
            Q[j, f] += c
    return QueueState(Q, q.dst, q.slot + 1), delivered


def stability_report(trace) -> dict:
    """Backlog statistics over a run.

    ``trace`` is a sequence of :class:`QueueState` or of total backlogs.
    ``trend_slope`` is the least-squares slope (packets/slot) over the last
    half of the run.
    """
    totals = np.array([s.total() if isinstance(s, QueueState) else s for s in trace], dtype=float)
    if len(totals) < 100:
        raise ValueError("stability_report needs at least 100 slots")
    half = totals[len(totals) // 2:]
    t = np.arange(len(half), dtype=float)
    slope = float(np.polyfit(t, half, 1)[0])
    return {
        "max_total_backlog": float(totals.max()),
        "time_avg_backlog": float(half.mean()),
        "trend_slope": slope,
    }
