import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cidp import sim_engine as se
from cidp.core_model import FlowSpec
from cidp.metrics_reporting import compliance, saet
from oracles import bfs_oracle


def test_route_two_nodes():
    adj = np.array([[0, 1], [1, 0]], dtype=bool)
    assert se.shortest_path_route(adj, 0, 1) == 1


def test_route_line():
    adj = np.zeros((3, 3), dtype=bool)
    adj[0, 1] = adj[1, 0] = adj[1, 2] = adj[2, 1] = True
    assert se.shortest_path_route(adj, 0, 2) == 1
    assert se.shortest_path_route(adj, 2, 2) is None


def test_route_ties_lowest_id():
    adj = np.zeros((4, 4), dtype=bool)
    for i, j in [(0, 2), (0, 1), (1, 3), (2, 3)]:
        adj[i, j] = True
    assert se.shortest_path_route(adj, 0, 3) == 1


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_paths_match_bfs(seed):
    rng = np.random.default_rng(seed)
    adj = rng.random((8, 8)) < 0.3
    np.fill_diagonal(adj, False)
    g = nx.DiGraph([(int(i), int(j)) for i, j in zip(*np.nonzero(adj))])
    for s in range(8):
        for d in range(8):
            if s == d:
                continue
            ref = bfs_oracle(adj.tolist(), s, d)
            p = se.shortest_path(adj, s, d)
            if ref is None:
                assert p is None
                continue
            assert len(p) - 1 == ref == nx.shortest_path_length(g, s, d)
            assert all(adj[a, b] for a, b in zip(p, p[1:]))


def test_zero_slots(small_cfg):
    r = se.run(small_cfg.replace(sim__n_slots=0), "cidp")
    assert r.trace == [] and r.ledger.nominal_pkts == 0 and r.ledger.rt_delivered == 0


def test_two_node_always_active(paper_cfg):
    cfg = paper_cfg.replace(flows=(FlowSpec(0, 1, 10.0, 100.0, True, 1),), network__n_nodes=2,
                            network__positions_m=((0.0, 0.0), (10.0, 0.0)), network__rician_k_db=30.0,
                            sim__n_slots=500)
    r = se.run(cfg, "cidp", check_conservation=True)
    assert r.ledger.delivered_data_pkts == r.ledger.nominal_pkts > 0
    assert compliance(r.ledger, cfg.control.dmax_ms) == 1.0


@pytest.mark.parametrize("mode", se.MODES)
def test_conservation_every_slot(small_cfg, mode):
    r = se.run(small_cfg, mode, 1, check_conservation=True)
    assert r.ledger.extra["conservation_ok"]
    held = r.final_state.backlog.sum(axis=0) + (r.final_state.in_flight if mode == "cidp" else 0)
    assert np.array_equal(r.arrived, r.delivered + held)


@pytest.mark.parametrize("mode", se.MODES)
def test_deterministic(small_cfg, mode):
    a = se.run(small_cfg, mode, 2)
    b = se.run(small_cfg, mode, 2)
    assert a.ledger.to_dict() == b.ledger.to_dict()
    assert [e.to_json() for e in a.trace] == [e.to_json() for e in b.trace]


def test_modes_share_arrivals(small_cfg):
    a = se.run(small_cfg, "cidp", 0)
    b = se.run(small_cfg, "baseline", 0)
    arr = lambda r: [(e.slot, e.flow, e.payload.get("count", 1)) for e in r.trace if e.kind == "arrival"]
    assert arr(a) == arr(b)
    assert np.array_equal(a.arrived, b.arrived)


def test_cidp_trace_events(small_cfg):
    r = se.run(small_cfg, "cidp", 0)
    kinds = {e.kind for e in r.trace}
    assert {"arrival", "forward", "hold", "deliver", "dummy"} <= kinds
    slots = [e.slot for e in r.trace]
    assert slots == sorted(slots)


def test_unroutable_flow_rejected(paper_cfg):
    cfg = paper_cfg.replace(flows=(FlowSpec(0, 1, 10.0, 100.0, True, 1),), network__n_nodes=2,
                            network__positions_m=((0.0, 0.0), (1e6, 0.0)), sim__n_slots=10)
    with pytest.raises(se.SimulationError):
        se.run(cfg, "cidp")


def test_bad_mode(small_cfg):
    with pytest.raises(ValueError):
        se.run(small_cfg, "tor")


def test_saet_small(small_cfg):
    for mode in se.MODES:
        assert saet(se.run(small_cfg, mode).ledger) > 0.9
