import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cidp.adversary import (AnonymityPosterior, CalibrationError, TrilemmaInputs, calibrate_threshold,
                            chi2_threshold, complex_noise, delta_floor, detection_probability,
                            detection_sweep, effective_set_size, inband_gain, infer_anonymity,
                            monotone_within, posterior, radiometer, radiometer_statistic)
from cidp.core_model import make_rng


def test_radiometer_sum_of_squares():
    y = np.array([1 + 1j, 2.0, 0.0, 1j])
    assert radiometer_statistic(y, 4)[0] == pytest.approx(7.0)
    assert radiometer(y, 4, 6.9) and not radiometer(y, 4, 7.1)


def test_calibration_needs_trials():
    with pytest.raises(CalibrationError):
        calibrate_threshold(0.001, 4, trials=1000)


def test_calibration_matches_closed_form():
    thr = calibrate_threshold(0.05, 4, trials=200_000, rng=make_rng(1, "cal"))
    assert thr == pytest.approx(chi2_threshold(0.05, 4), rel=0.02)


def test_empirical_false_alarm():
    rng = make_rng(2, "fa")
    thr = chi2_threshold(0.05, 4)
    noise = complex_noise(rng, (100_000, 4))
    assert abs(np.mean(radiometer(noise, 4, thr)) - 0.05) < 0.004


def test_mc_matches_noncentral_chi2(paper_cfg):
    c = detection_sweep(paper_cfg, "static_baseline", rng=make_rng(3, "mc"),
                        threshold=chi2_threshold(0.05, 4))
    snr = 10 ** (c.snr_db / 10) * c.gain ** 2
    exact = detection_probability(snr, 4, c.threshold)
    assert np.all(np.abs(c.p_d - exact) <= 4 * np.maximum(c.stderr, 1e-3))


def test_sweep_ordering_and_monotone(paper_cfg):
    from cidp.sltm_optimizer import design_for
    _, d = design_for(paper_cfg)
    b = detection_sweep(paper_cfg, "static_baseline", d.schedule, make_rng(4, "d"))
    s = detection_sweep(paper_cfg, "cidp_sltm", d.schedule, make_rng(4, "d"))
    assert monotone_within(b) and monotone_within(s)
    assert np.all(s.p_d <= b.p_d + 2 * s.stderr)
    assert inband_gain(paper_cfg, "cidp_sltm", d.schedule) < inband_gain(paper_cfg, "static_baseline") == 1.0


@pytest.mark.parametrize("n", [1, 2, 5, 15, 16])
def test_set_size_extremes(n):
    assert effective_set_size(np.full(n, 1.0 / n)) == n
    w = np.zeros(n)
    w[0] = 1.0
    assert effective_set_size(w) == 1.0


def test_posterior_validation():
    with pytest.raises(ValueError):
        AnonymityPosterior(0, 0, 0, np.arange(2), np.array([0.7, 0.7]))


def test_posterior_flags_matching_node():
    rng = np.random.default_rng(0)
    S = 100
    send = np.zeros(S, dtype=bool)
    send[::10] = True
    det = rng.random((S, 6)) < 0.05
    det[send, 3] = True
    w = posterior(det, send, np.full(6, 0.9), np.arange(6))
    assert int(np.argmax(w)) == 3
    assert effective_set_size(w) < 2


def test_no_evidence_gives_uniform():
    send = np.zeros(50, dtype=bool)
    send[5] = True
    w = posterior(np.zeros((50, 8), dtype=bool), send, np.zeros(8), np.arange(8))
    assert effective_set_size(w) == pytest.approx(8.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_relabel_symmetry(seed):
    rng = np.random.default_rng(seed)
    det = rng.random((40, 6)) < 0.3
    send = rng.random(40) < 0.2
    send[0] = True
    p = rng.uniform(0.1, 0.9, 6)
    perm = rng.permutation(6)
    w = posterior(det, send, p, np.arange(6))
    w2 = posterior(det[:, perm], send, p[perm], np.arange(6))
    assert np.allclose(w[perm], w2)


def test_infer_anonymity_epochs():
    det = np.zeros((250, 4), dtype=bool)
    post = infer_anonymity(det, {0: np.array([5, 120, 130])}, {0: 3}, np.full(4, 0.5), 100)
    assert [p.epoch for p in post] == [0, 1]
    assert all(3 not in p.candidates for p in post)
    post = infer_anonymity(det, {0: np.array([5])}, {0: 3}, np.full(4, 0.5), 100, "active", [0, 1])
    assert list(post[0].candidates) == [0, 1]


def test_delta_floor_examples():
    assert delta_floor(tau=1, beta=0, lam=0, gamma=0.1, e_phy=0) == 1.0
    assert delta_floor(tau=1, beta=0.25, lam=0.25) == 0.0
    assert delta_floor(tau=1, beta=0, lam=0, gamma=1.0, e_phy=1.0) == 0.0


def test_delta_floor_monotone_grid():
    g = np.linspace(0, 1, 10)
    for tau in (0.5, 1.0, 2.0):
        for gamma in (0.05, 0.1):
            vals = np.array([[[delta_floor(TrilemmaInputs(tau, b, l, gamma, e)) for e in g * 5]
                              for l in g] for b in g])
            assert np.all(np.diff(vals, axis=0) <= 0)
            assert np.all(np.diff(vals, axis=1) <= 0)
            assert np.all(np.diff(vals, axis=2) <= 0)
            assert vals.min() >= 0 and vals.max() <= 1


def test_trilemma_validation():
    with pytest.raises(ValueError):
        TrilemmaInputs(beta=1.5)
