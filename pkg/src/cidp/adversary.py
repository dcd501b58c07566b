"""Global passive adversary: radiometer, sender inference, trilemma floor.

Detection model.  The eavesdropper runs an energy detector over ``window``
complex baseband samples, ``L = sum |y_k|^2`` with unit-variance complex
noise.  Each sample integrates one symbol, and a symbol spans all SLTM
sub-slots of the rounded schedule, so the in-band amplitude gain is the
sub-slot average of the array factor toward the eavesdropper.  Gains are
expressed relative to the peak masked sidelobe of the static all-on beam;
the SNR grid is the SNR through that sidelobe.

Inference model.  Per epoch and real-time flow the adversary knows the
slots in which the flow's packets left their source and observes, for every
node and slot, whether an emission from that node was detected.  Each
candidate's likelihood compares the detection pattern in those slots with
the node's own background detection rate in the other slots of the epoch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .sltm_optimizer import build_problem, mask_grid, pattern, static_peak_sidelobe

MODES = ("cidp_sltm", "static_baseline")


class CalibrationError(ValueError):
    """Too few Monte Carlo trials for the requested false-alarm quantile."""


# ---------------------------------------------------------------- trilemma


@dataclass(frozen=True)
class TrilemmaInputs:
    tau: float = 1.0
    beta: float = 0.0
    lam: float = 0.0
    gamma: float = 0.1
    e_phy: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.lam < 0 or self.gamma < 0 or self.e_phy < 0 or self.tau < 0:
            raise ValueError("tau, lambda, gamma and e_phy must be non-negative")


def delta_floor(inputs: TrilemmaInputs | None = None, **kw) -> float:
    """Smallest adversary success rate consistent with the augmented bound.

    ``delta >= 1 - 2 tau (beta + lambda) - gamma e_phy``, clamped to ``[0, 1]``.
    Keyword form: ``delta_floor(tau=1, beta=.25, lam=.25)``.
    """
    x = inputs if inputs is not None else TrilemmaInputs(**kw)
    d = 1.0 - 2.0 * x.tau * (x.beta + x.lam) - x.gamma * x.e_phy
    return float(min(1.0, max(0.0, d)))


# ---------------------------------------------------------------- radiometer


def radiometer_statistic(observations, window: int) -> np.ndarray:
    """Energy ``sum |y|^2`` over consecutive non-overlapping windows (last axis)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    y = np.asarray(observations)
    n = y.shape[-1] // window
    if n == 0:
        raise ValueError(f"need at least {window} samples, got {y.shape[-1]}")
    e = (y[..., :n * window].real ** 2 + y[..., :n * window].imag ** 2)
    return e.reshape(*y.shape[:-1], n, window).sum(axis=-1)


def radiometer(observations, window: int, threshold: float):
    """Detection decision(s): ``True`` where the window energy exceeds ``threshold``."""
    det = radiometer_statistic(observations, window) > threshold
    return bool(det[..., 0]) if det.shape[-1] == 1 and det.ndim == 1 else det


def complex_noise(rng: np.random.Generator, size) -> np.ndarray:
    """Circular complex Gaussian with unit variance."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) * np.sqrt(0.5)


def calibrate_threshold(pfa: float, window: int, noise_model=None, trials: int = 10000,
                        rng: np.random.Generator | None = None) -> float:
    """Empirical ``(1 - pfa)`` quantile of noise-only window energy.

    ``noise_model(rng, shape)`` draws noise samples; default unit complex
    Gaussian.
    """
    if not 0.0 < pfa < 1.0:
        raise ValueError("pfa must lie in (0, 1)")
    if window < 1:
        raise ValueError("window must be >= 1")
    if trials * pfa < 20:
        raise CalibrationError(
            f"{trials} trials give only {trials * pfa:.3g} expected exceedances at pfa={pfa}; need >= 20")
    rng = rng if rng is not None else np.random.default_rng(0)
    draw = noise_model or complex_noise
    lam = radiometer_statistic(draw(rng, (trials, window)), window)[:, 0]
    return float(np.quantile(lam, 1.0 - pfa, method="higher"))


def chi2_threshold(pfa: float, window: int) -> float:
    """Closed-form threshold: ``2 L`` is chi-square with ``2 window`` degrees of freedom."""
    return float(stats.chi2.isf(pfa, 2 * window) / 2.0)


def detection_probability(snr_lin, window: int, threshold: float):
    """Exact P_d for a constant-envelope signal at per-sample SNR ``snr_lin``."""
    snr = np.asarray(snr_lin, dtype=float)
    nc = 2.0 * window * snr
    pd = np.where(nc > 0, stats.ncx2.sf(2.0 * threshold, 2 * window, np.maximum(nc, 1e-300)),
                  stats.chi2.sf(2.0 * threshold, 2 * window))
    return pd if pd.ndim else float(pd)


# ---------------------------------------------------------------- sweep


@dataclass
class DetectionCurve:
    mode: str
    snr_db: np.ndarray
    p_d: np.ndarray
    stderr: np.ndarray
    trials: int
    threshold: float
    theta_eve_deg: float
    gain: float

    @property
    def points(self):
        return list(zip(self.snr_db.tolist(), self.p_d.tolist()))


def subslot_gains(cfg, mode: str, schedule=None, theta_deg=None) -> np.ndarray:
    """Complex array factor per sub-slot toward ``theta_deg``, relative to the static peak sidelobe.

    Static mode uses the all-on weights in every sub-slot.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    sc = cfg.sltm
    p = build_problem(sc)
    ref = static_peak_sidelobe(p)
    if mode == "static_baseline" or schedule is None:
        sched = np.ones((1, sc.m_elements))
    else:
        sched = np.atleast_2d(np.asarray(schedule, dtype=float))
    if theta_deg is None:
        theta_deg = eve_direction(cfg, mode, sched)
    return np.atleast_1d(pattern(sched, theta_deg, sc.theta0_deg, sc.spacing_wavelengths)) / ref


def eve_direction(cfg, mode: str, schedule=None) -> float:
    """Configured eavesdropper angle, or the masked direction of largest in-band gain."""
    if cfg.adversary.theta_eve_deg is not None:
        return float(cfg.adversary.theta_eve_deg)
    sc = cfg.sltm
    grid = mask_grid(sc.theta0_deg, sc.mask_exclusion_deg, sc.grid_step_deg)
    if mode == "static_baseline" or schedule is None:
        sched = np.ones((1, sc.m_elements))
    else:
        sched = np.atleast_2d(np.asarray(schedule, dtype=float))
    F = pattern(sched, grid, sc.theta0_deg, sc.spacing_wavelengths)  # (angles, K)
    inband = np.abs(np.atleast_2d(F.T).mean(axis=0)) if F.ndim == 2 else np.abs(F)
    return float(grid[int(np.argmax(inband))])


def inband_gain(cfg, mode: str, schedule=None) -> float:
    """Amplitude gain seen by the radiometer in the worst-case (or configured) direction."""
    return float(abs(subslot_gains(cfg, mode, schedule).mean()))


def detection_sweep(cfg, mode: str, schedule=None, rng: np.random.Generator | None = None,
                    threshold: float | None = None) -> DetectionCurve:
    """Monte Carlo P_d over the configured SNR grid.

    Noise, symbols and the threshold draws are shared across SNR points
    (common random numbers), so the curve is smooth in SNR.
    """
    adv = cfg.adversary
    rng = rng if rng is not None else np.random.default_rng(cfg.sim.seed)
    W, T = adv.window_samples, adv.mc_trials
    if threshold is None:
        threshold = calibrate_threshold(adv.pfa, W, trials=T, rng=rng)
    G = subslot_gains(cfg, mode, schedule)  # (K,)
    K = len(G)
    theta = eve_direction(cfg, mode, schedule if mode == "cidp_sltm" else None)
    # one unit-modulus symbol per sample, held over its K sub-slots
    sym = np.exp(2j * np.pi * rng.random((T, W)))
    # sub-slot noise with variance K so the per-sample average has unit variance
    noise = complex_noise(rng, (T, W, K)) * np.sqrt(K)
    nbar = noise.mean(axis=2)
    sig = sym * G.mean()
    snr_db = np.asarray(adv.snr_grid_db, dtype=float)
    pd = np.empty(len(snr_db))
    for i, s in enumerate(snr_db):
        y = np.sqrt(10.0 ** (s / 10.0)) * sig + nbar
        pd[i] = np.mean(radiometer_statistic(y, W)[:, 0] > threshold)
    se = np.sqrt(np.maximum(pd * (1.0 - pd), 1e-12) / T)
    return DetectionCurve(mode, snr_db, pd, se, T, float(threshold), theta, float(abs(G.mean())))


def monotone_within(curve: DetectionCurve, k: float = 2.0) -> bool:
    """Non-decreasing in SNR up to ``k`` standard errors."""
    d = np.diff(curve.p_d)
    tol = k * np.sqrt(curve.stderr[1:] ** 2 + curve.stderr[:-1] ** 2)
    return bool(np.all(d >= -tol))


# ---------------------------------------------------------------- inference


@dataclass
class AnonymityPosterior:
    receiver: int
    flow: int
    epoch: int
    candidates: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if abs(w.sum() - 1.0) > 1e-9 or np.any(w < 0):
            raise ValueError("posterior weights must be a probability vector")
        self.weights = w

    @property
    def effective_set_size(self) -> float:
        return effective_set_size(self.weights)


def effective_set_size(weights) -> float:
    """``2**H`` of a probability vector; exactly ``n`` for uniform and 1 for a point mass."""
    w = np.asarray(weights, dtype=float)
    w = w[w > 0]
    if w.size <= 1:
        return 1.0
    if np.all(w == w[0]):
        return float(w.size)
    h = -(w * np.log2(w)).sum()
    return float(min(w.size, max(1.0, 2.0 ** h)))


def node_detection_probs(snr_db, window: int, pfa: float, gain: float) -> np.ndarray:
    """Per-emission detection probability at each node's eavesdropper SNR."""
    thr = chi2_threshold(pfa, window)
    snr = 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0) * gain * gain
    return np.asarray(detection_probability(snr, window, thr))


def posterior(detected: np.ndarray, send_slots: np.ndarray, p_detect: np.ndarray,
              candidates: np.ndarray) -> np.ndarray:
    """Posterior over ``candidates`` for one flow and epoch.

    ``detected`` is ``(slots, nodes)`` boolean; ``send_slots`` a boolean mask
    over the epoch's slots.  A sender is detected in a send slot with
    probability ``1 - (1-p)(1-g)``; otherwise detections follow its
    background rate ``g`` (Laplace-smoothed over the remaining slots).
    """
    D = np.asarray(detected, dtype=bool)[:, candidates]
    S = np.asarray(send_slots, dtype=bool)
    p = np.clip(np.asarray(p_detect, dtype=float)[candidates], 0.0, 1.0 - 1e-12)
    rest = ~S
    g = (D[rest].sum(axis=0) + 1.0) / (rest.sum() + 2.0)
    hits = D[S].sum(axis=0)
    miss = S.sum() - hits
    on = 1.0 - (1.0 - p) * (1.0 - g)
    loglr = hits * (np.log(on) - np.log(g)) + miss * np.log1p(-p)
    loglr -= loglr.max()
    w = np.exp(loglr)
    return w / w.sum()


def infer_anonymity(detected: np.ndarray, send_slots: dict, receivers: dict, p_detect: np.ndarray,
                    epoch_slots: int = 100, candidates: str = "all",
                    active_nodes=None) -> list[AnonymityPosterior]:
    """Posteriors for every (real-time flow, epoch) with at least one source departure.

    ``detected``: ``(n_slots, n_nodes)`` adversary detections, or a mapping
    receiver -> such a matrix when what counts as a relevant emission
    depends on the receiver.
    ``send_slots``: flow -> sorted slot indices at which the flow's packets left the source.
    ``receivers``: flow -> destination node.
    ``candidates``: ``"all"`` (every node except the receiver) or ``"active"``
    (nodes that emitted at least once, given as ``active_nodes``).
    """
    out = []
    for f in sorted(send_slots):
        r = receivers[f]
        D = np.asarray(detected[r] if isinstance(detected, dict) else detected, dtype=bool)
        n_slots, n = D.shape
        if candidates == "active" and active_nodes is not None:
            cand = np.array([c for c in sorted(active_nodes) if c != r], dtype=np.int64)
        else:
            cand = np.array([c for c in range(n) if c != r], dtype=np.int64)
        slots = np.asarray(send_slots[f], dtype=np.int64)
        for e0 in range(0, n_slots, epoch_slots):
            e1 = min(e0 + epoch_slots, n_slots)
            sel = slots[(slots >= e0) & (slots < e1)] - e0
            if sel.size == 0:
                continue
            mask = np.zeros(e1 - e0, dtype=bool)
            mask[sel] = True
            w = posterior(D[e0:e1], mask, p_detect, cand)
            out.append(AnonymityPosterior(r, f, e0 // epoch_slots, cand, w))
    return out
