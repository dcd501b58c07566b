import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cidp.sltm_optimizer import (SltmError, design_for, estimate_ephy, main_lobe_gains, make_problem,
                                 masked_peak, round_schedule, solve_socp, static_peak_sidelobe)
from oracles import enumerate_binary_peak, polygon_socp

CASES = [(m, th0, rho, step) for m in range(3, 11)
         for th0, rho, step in [(0.0, 0.9, 5.0), (20.0, 0.8, 10.0), (0.0, 0.7, 15.0), (-30.0, 0.95, 6.0)]]


@pytest.mark.parametrize("m, th0, rho, step", CASES)
def test_matches_lp_bracket(m, th0, rho, step):
    p = make_problem(m, th0, 10.0, step, rho=rho)
    d = solve_socp(p)
    lo, hi, _ = polygon_socp(p.R, p.I, rho)
    assert lo * (1 - 1e-4) <= d.eta_star <= hi * (1 + 1e-4)
    assert d.feasibility_residual <= 1e-6
    assert d.kkt_residual <= 1e-6


def test_matches_cvxpy():
    cp = pytest.importorskip("cvxpy")
    p = make_problem(8, 0.0, 10.0, 3.0, rho=0.85)
    s = cp.Variable(8)
    cons = [s >= 0, s <= 1, cp.sum(s) >= 0.85 * 8]
    eta = cp.Variable()
    for r, i in zip(p.R, p.I):
        cons.append(cp.norm(cp.hstack([r @ s, i @ s])) <= eta)
    cp.Problem(cp.Minimize(eta), cons).solve()
    assert solve_socp(p).eta_star == pytest.approx(eta.value, rel=1e-4)


@pytest.mark.parametrize("m", [3, 4, 5, 6, 7, 8])
def test_relaxation_below_binary_designs(m):
    p = make_problem(m, 0.0, 10.0, 5.0, rho=0.6)
    eta = solve_socp(p).eta_star
    k = math.ceil(0.6 * m)
    best_binary = min(enumerate_binary_peak(p.R, p.I, kk) for kk in range(k, m + 1))
    assert eta <= best_binary + 1e-9


def test_equality_mode_is_static():
    p = make_problem(8, rho=1.0)
    d = solve_socp(p)
    assert np.all(d.s_relaxed == 1.0)
    assert d.eta_star == pytest.approx(static_peak_sidelobe(p))


def test_empty_mask():
    with pytest.raises(SltmError):
        make_problem(4, 0.0, 95.0, 5.0)


def test_convex_combination(rng):
    p = make_problem(10, step_deg=2.0)
    for _ in range(1000):
        a, b = rng.random(10), rng.random(10)
        lam = rng.random()
        lhs = masked_peak(p, lam * a + (1 - lam) * b)
        assert lhs <= lam * masked_peak(p, a) + (1 - lam) * masked_peak(p, b) + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=20), st.integers(1, 32), st.integers(0, 1000))
def test_round_schedule_means(s, k, seed):
    s = np.array(s)
    sched = round_schedule(s, k, np.random.default_rng(seed))
    assert sched.shape == (k, len(s))
    assert np.all(np.abs(sched.mean(axis=0) - s) <= 1.0 / (2 * k) + 1e-12)
    per_slot = sched.sum(axis=1)
    assert per_slot.max() - per_slot.min() <= 1


def test_ephy_zero_for_constant_schedule():
    assert estimate_ephy(np.ones((8, 6)), 40.0) == 0.0


def test_paper_design(paper_cfg):
    p, d = design_for(paper_cfg)
    assert d.eta_star < static_peak_sidelobe(p)
    g = main_lobe_gains(d.schedule)
    assert np.all(g >= np.floor(paper_cfg.sltm.rho * p.m) - 1)
    assert 0.0 < d.e_phy_bits <= np.log2(paper_cfg.sltm.subslots)
