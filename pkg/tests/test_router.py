import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cidp.router_lyapunov import (InfeasibleDecision, QueueState, RoutingDecision, apply_decision,
                                  decide_slot, decision_objective, stability_report)
from oracles import brute_force_slot


def random_instance(rng, n_max=4, f_max=2, q_max=3):
    n = int(rng.integers(2, n_max + 1))
    F = int(rng.integers(1, f_max + 1))
    dst = tuple(int(rng.integers(0, n)) for _ in range(F))
    Q = rng.integers(0, q_max + 1, (n, F)).astype(np.int64)
    for f, d in enumerate(dst):
        Q[d, f] = 0
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    keep = rng.random(len(pairs)) < 0.5
    links = [p for p, k in zip(pairs, keep) if k][:5]  # keeps enumeration small
    return QueueState(Q, dst), links


def test_two_node_link():
    q = QueueState(np.array([[5], [0]]), (1,))
    d = decide_slot(q, [(0, 1)], 1, V=0.0)
    assert d.transmissions == [((0, 1), 0, 1)]
    assert d.dummies == []


def test_empty_queues_dummies_only():
    q = QueueState.empty(3, (2,))
    d = decide_slot(q, [(0, 1), (1, 2)], 1, V=1.0)
    assert d.data_count() == 0 and d.dummy_count() == 2
    assert d.entropy_injected == 2.0


def test_negative_weight_not_sent():
    q = QueueState(np.array([[1], [4], [0]]), (2,))
    d = decide_slot(q, [(0, 1)], 1, V=0.0)
    assert d.transmissions == []


def test_shared_backlog_not_overdrawn():
    # one packet, two good links: only one may carry it
    q = QueueState(np.array([[1], [0], [0]]), (2,))
    d = decide_slot(q, [(0, 1), (0, 2)], 1, V=0.0)
    assert d.data_count() == 1
    apply_decision(q, d)


def test_apply_rejects_overdraw():
    q = QueueState(np.array([[0], [0]]), (1,))
    d = RoutingDecision(transmissions=[((0, 1), 0, 1)])
    with pytest.raises(InfeasibleDecision):
        apply_decision(q, d)


def test_matches_brute_force_random(rng):
    for _ in range(100):
        q, links = random_instance(rng)
        V = float(rng.choice([0.0, 0.5, 2.0]))
        d = decide_slot(q, links, 1, V)
        best = brute_force_slot(q.backlog, q.dst, links, [1] * len(links), V)
        assert decision_objective(q, d, V) == pytest.approx(best, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_conservation_property(seed):
    rng = np.random.default_rng(seed)
    q, links = random_instance(rng, q_max=5)
    d = decide_slot(q, links, 1, V=1.0)
    q2, delivered = apply_decision(q, d)
    assert q2.total() + delivered.sum() == q.total()
    assert (q2.backlog >= 0).all()


def test_stability_report_needs_length():
    with pytest.raises(ValueError):
        stability_report([0] * 10)
    r = stability_report(list(range(200)))
    assert r["trend_slope"] == pytest.approx(1.0)
