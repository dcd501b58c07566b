"""Convex sidelobe-time-modulation design.

The relaxed problem over element weights ``s`` in ``[0, 1]^M``::

    minimise   eta
    subject to |b(theta_l)^T s| <= eta        for every masked angle
               sum(s) >= rho * M              (main lobe, b(theta0) = 1)

where ``b`` is the ULA response co-phased toward ``theta0``.  Each magnitude
bound is a second-order cone in ``(eta, Re, Im)``.  With ``rho = 1``
(``equality_mode``) the box forces ``s = 1`` and nothing is optimised.

The solver is a primal log-barrier path-following method with Newton
centring.  On exit an exactly dual-feasible point is assembled from the
barrier multipliers; the reported ``kkt_residual`` is the resulting duality
gap, a certified bound on the distance of ``eta_star`` from the optimum.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel_phy import steered_response
from .kernels import soc_barrier


class SltmError(RuntimeError):
    pass


@dataclass(frozen=True)
class SltmProblem:
    m: int
    spacing_wavelengths: float
    theta0_deg: float
    mask_angles_deg: np.ndarray
    R: np.ndarray
    I: np.ndarray
    rho: float = 0.9
    equality_mode: bool = False

    def responses(self) -> np.ndarray:
        return self.R + 1j * self.I


@dataclass
class SltmDesign:
    s_relaxed: np.ndarray
    eta_star: float
    kkt_residual: float
    feasibility_residual: float
    iterations: int = 0
    schedule: np.ndarray | None = None
    e_phy_bits: float | None = None
    extra: dict = field(default_factory=dict)


def mask_grid(theta0_deg: float, exclusion_deg: float, step_deg: float) -> np.ndarray:
    n = int(np.floor(180.0 / step_deg + 1e-9))
    grid = np.round(-90.0 + step_deg * np.arange(n + 1), 9)
    return grid[np.abs(grid - theta0_deg) > exclusion_deg + 1e-9]


def make_problem(m: int, theta0_deg: float = 0.0, exclusion_deg: float = 10.0, step_deg: float = 1.0,
                 spacing_wavelengths: float = 0.5, rho: float = 0.9,
                 equality_mode: bool = False, mask_angles_deg=None) -> SltmProblem:
    if mask_angles_deg is None:
        mask = mask_grid(theta0_deg, exclusion_deg, step_deg)
    else:
        mask = np.asarray(mask_angles_deg, dtype=float)
    if mask.size == 0:
        raise SltmError("empty sidelobe mask after main-lobe exclusion")
    B = steered_response(mask, theta0_deg, m, spacing_wavelengths)
    return SltmProblem(m, spacing_wavelengths, theta0_deg, mask, np.ascontiguousarray(B.real),
                       np.ascontiguousarray(B.imag), rho, equality_mode)


def build_problem(cfg) -> SltmProblem:
    """Problem for a :class:`ScenarioConfig` (or its ``sltm`` section)."""
    s = getattr(cfg, "sltm", cfg)
    return make_problem(s.m_elements, s.theta0_deg, s.mask_exclusion_deg, s.grid_step_deg,
                        s.spacing_wavelengths, s.rho, s.equality_mode)


def masked_peak(p: SltmProblem, s: np.ndarray) -> float:
    return float(np.max(np.hypot(p.R @ s, p.I @ s)))


def _interior(p: SltmProblem, x: np.ndarray, lo: float) -> bool:
    s, eta = x[:p.m], x[p.m]
    if s.min() <= 0.0 or s.max() >= 1.0 or s.sum() <= lo or eta <= 0.0:
        return False
    ur, ui = p.R @ s, p.I @ s
    return bool((ur * ur + ui * ui).max() < eta * eta)


def _barrier(p: SltmProblem, x: np.ndarray, lo: float):
    M = p.m
    s, eta = x[:M], x[M]
    if s.min() <= 0.0 or s.max() >= 1.0:
        return None
    slack = s.sum() - lo
    if slack <= 0.0:
        return None
    soc = soc_barrier(p.R, p.I, s, eta)
    if soc is None:
        return None
    val, grad, H = soc  # fresh arrays, safe to update in place
    a, b = 1.0 / s, 1.0 / (1.0 - s)
    val = val - np.log(s * (1.0 - s)).sum() - np.log(slack)
    grad[:M] += b - a - 1.0 / slack
    Hs = H[:M, :M]
    Hs += 1.0 / (slack * slack)
    Hs.flat[::M + 1] += a * a + b * b
    return val, grad, H


def _barrier_value(p: SltmProblem, x: np.ndarray, lo: float):
    """Barrier value alone, ``None`` outside the interior."""
    s, eta = x[:p.m], x[p.m]
    if s.min() <= 0.0 or s.max() >= 1.0 or eta <= 0.0:
        return None
    slack = s.sum() - lo
    if slack <= 0.0:
        return None
    ur, ui = p.R @ s, p.I @ s
    D = eta * eta - ur * ur - ui * ui
    if D.min() <= 0.0:
        return None
    return float(-np.log(D).sum() - np.log(s * (1.0 - s)).sum() - np.log(slack))


def _dual_gap(p: SltmProblem, s: np.ndarray, z0, zr, zi, mu: float):
    """Repair multipliers into an exactly dual-feasible point; returns (dual_bound, gap).

    Cone duals are rescaled so ``sum z0 = 1``; the remaining stationarity
    residual in ``s`` is absorbed by the box multipliers.
    """
    lo = p.rho * p.m
    kappa = 1.0 / z0.sum()
    zr, zi = zr * kappa, zi * kappa
    mu = max(mu, 0.0)
    target = p.R.T @ zr + p.I.T @ zi + mu  # = lam_hi - lam_lo
    lam_hi = np.maximum(target, 0.0)
    dual = float(-lam_hi.sum() + mu * lo)
    return dual, masked_peak(p, s) - dual


def _certificate(p: SltmProblem, s: np.ndarray, eta: float, t: float):
    """Dual point from the barrier multipliers at parameter ``t``."""
    ur, ui = p.R @ s, p.I @ s
    D = eta * eta - ur * ur - ui * ui
    mu = 1.0 / (t * (s.sum() - p.rho * p.m))
    return _dual_gap(p, s, 2.0 * eta / (t * D), -2.0 * ur / (t * D), -2.0 * ui / (t * D), mu)


def _polish(p: SltmProblem, s: np.ndarray, eta: float, t: float, tol: float):
    """Try active-set guesses of decreasing size; first one certifying ``<= tol`` wins."""
    ur, ui = p.R @ s, p.I @ s
    z_bar = 2.0 * eta / (t * (eta * eta - ur * ur - ui * ui))
    z_bar = z_bar / z_bar.sum()
    best = None
    tried = set()
    for thr in (1e-3, 1e-2, 1e-1):
        A = np.flatnonzero(z_bar > thr)
        key = tuple(A)
        if not A.size or key in tried:
            continue
        tried.add(key)
        out = _polish_active(p, s, eta, t, A, z_bar)
        if out is not None and (best is None or out[2] < best[2]):
            best = out
            if best[2] <= tol:
                break
    return best


def _polish_active(p: SltmProblem, s: np.ndarray, eta: float, t: float, A: np.ndarray,
                   z_bar: np.ndarray, iters: int = 30):
    """Newton on the KKT system of active cones ``A``.

    Returns ``(s, dual, gap)`` or ``None`` if the guess does not certify.
    """
    M = p.m
    lo = p.rho * M
    upper = 1.0 - s < 1e-4
    lower = s < 1e-4
    free = np.flatnonzero(~upper & ~lower)
    ml = s.sum() - lo < 1e-4 * M
    s = s.copy()
    s[upper] = 1.0
    s[lower] = 0.0
    z = z_bar[A] / z_bar[A].sum()
    mu = 1.0 / (t * (s.sum() - lo)) if ml else 0.0
    nF, nA = len(free), len(A)
    RA, IA = p.R[A], p.I[A]
    for _ in range(iters):
        ur, ui = RA @ s, IA @ s
        mag = np.hypot(ur, ui)
        if np.any(mag <= 0):
            return None
        G = (ur[:, None] * RA + ui[:, None] * IA) / mag[:, None]  # d|u|/ds
        n = nF + 1 + nA + int(ml)
        F = np.zeros(n)
        J = np.zeros((n, n))
        # stationarity in free s: sum z G - mu = 0
        F[:nF] = z @ G[:, free] - mu
        w = z / mag
        RF, IF, GF = RA[:, free], IA[:, free], G[:, free]
        J[:nF, :nF] = (RF * w[:, None]).T @ RF + (IF * w[:, None]).T @ IF - (GF * z[:, None]).T @ GF
        J[:nF, nF + 1:nF + 1 + nA] = G[:, free].T
        if ml:
            J[:nF, -1] = -1.0
        # eta stationarity: 1 - sum z = 0
        F[nF] = 1.0 - z.sum()
        J[nF, nF + 1:nF + 1 + nA] = -1.0
        # active cones: |u| - eta = 0
        F[nF + 1:nF + 1 + nA] = mag - eta
        J[nF + 1:nF + 1 + nA, :nF] = G[:, free]
        J[nF + 1:nF + 1 + nA, nF] = -1.0
        if ml:
            F[-1] = s.sum() - lo
            J[-1, :nF] = 1.0
        step = np.linalg.lstsq(J, -F, rcond=None)[0]
        s[free] += step[:nF]
        eta += step[nF]
        z = z + step[nF + 1:nF + 1 + nA]
        if ml:
            mu += step[-1]
        res = np.abs(F).max()
        if res < 1e-14:
            break
        if _ > 3 and res > 1e-3:
            return None
    if np.any(z < 0) or mu < 0 or np.any(s < 0) or np.any(s > 1) or s.sum() < lo * (1 - 1e-15):
        return None
    ur, ui = RA @ s, IA @ s
    mag = np.hypot(ur, ui)
    z0 = np.zeros(len(p.mask_angles_deg))
    zr = np.zeros_like(z0)
    zi = np.zeros_like(z0)
    z0[A] = z
    zr[A] = -z * ur / mag
    zi[A] = -z * ui / mag
    if z0.sum() <= 0:
        return None
    dual, gap = _dual_gap(p, s, z0, zr, zi, mu)
    return s, dual, gap


def solve_socp(p: SltmProblem, tol: float = 1e-6, max_newton: int = 500) -> SltmDesign:
    """Globally optimal relaxed weights with a duality-gap certificate ``<= tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = p.m
    if p.equality_mode or p.rho >= 1.0:
        s = np.ones(M)
        return SltmDesign(s, masked_peak(p, s), 0.0, 0.0, 0, extra={"dual_bound": masked_peak(p, s)})
    s, dual, newton = _solve_barrier(p, tol, max_newton)
    eta = masked_peak(p, s)
    gap = eta - dual
    lo = p.rho * M
    feas = float(max(0.0, lo - s.sum(), -s.min(), s.max() - 1.0))
    design = SltmDesign(s, eta, float(gap), feas, newton, extra={"dual_bound": dual})
    if gap > tol:
        raise SltmError(f"solver stopped with duality gap {gap:.3g} > tol {tol:.3g}")
    return design


def _solve_barrier(p: SltmProblem, tol: float, max_newton: int):
    """Barrier path-following on ``p``; returns ``(s, dual_bound, newton_steps)``."""
    M = p.m
    lo = p.rho * M
    s0 = np.full(M, 0.5 * (1.0 + p.rho))
    x = np.empty(M + 1)
    x[:M] = s0
    x[M] = 1.1 * masked_peak(p, s0) + 1.0
    nu = 2.0 * len(p.mask_angles_deg) + 2.0 * M + 1.0
    t = nu / x[M]
    c = np.zeros(M + 1)
    c[M] = 1.0
    newton = 0
    gap = np.inf
    while True:
        # centring
        for _ in range(100):
            f = _barrier(p, x, lo)
            if f is None:
                raise SltmError("iterate left the interior")
            val, g, H = f
            g = t * c + g
            # Jacobi equilibration; the Hessian spans many decades near the boundary
            sc = 1.0 / np.sqrt(H.diagonal())
            Hs = H * sc[:, None] * sc[None, :]
            try:
                dx = -sc * np.linalg.solve(Hs, sc * g)
            except np.linalg.LinAlgError:
                dx = -sc * np.linalg.lstsq(Hs, sc * g, rcond=None)[0]
            dec = float(-g @ dx)
            newton += 1
            if dec <= 1e-4 or newton >= max_newton:
                break
            # backtracking on the barrier value, starting from the full step
            f0 = t * x[M] + val
            step = 1.0
            while step > 1e-14:
                xn = x + step * dx
                fn = _barrier_value(p, xn, lo)
                if fn is not None and t * xn[M] + fn <= f0 - 0.25 * step * dec:
                    break
                step *= 0.5
            if step <= 1e-14:
                break
            x = xn
        if nu / t <= 1e-2:
            dual, gap = _certificate(p, x[:M], x[M], t)
            if gap > tol:
                pol = _polish(p, x[:M], x[M], t, tol)
                if pol is not None and pol[2] <= tol:
                    x[:M] = pol[0]
                    x[M] = masked_peak(p, pol[0])
                    dual, gap = pol[1], pol[2]
            if gap <= tol or newton >= max_newton:
                break
        if newton >= max_newton:
            dual, gap = _certificate(p, x[:M], x[M], t)
            break
        t *= 100.0
    return x[:M].copy(), float(dual), newton


def round_schedule(s_relaxed, subslots: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """Binary ``(subslots, M)`` schedule whose column means match ``s_relaxed`` to ``1/(2 subslots)``.

    Element ``m`` is on in ``round(s_m * K)`` sub-slots, allotted cyclically
    from a running pointer so the number of active elements per sub-slot
    differs by at most one.  ``rng`` shuffles the order in which elements are
    allotted; ``None`` keeps element order.
    """
    s = np.asarray(getattr(s_relaxed, "s_relaxed", s_relaxed), dtype=float)
    K = int(subslots)
    M = len(s)
    counts = np.clip(np.floor(s * K + 0.5), 0, K).astype(int)
    order = np.arange(M) if rng is None else rng.permutation(M)
    sched = np.zeros((K, M), dtype=np.int8)
    ptr = 0
    for m in order:
        c = counts[m]
        if c:
            sched[(ptr + np.arange(c)) % K, m] = 1
            ptr = (ptr + c) % K
    return sched


def pattern(s, theta_deg, theta0_deg: float = 0.0, spacing_wavelengths: float = 0.5) -> np.ndarray:
    """Complex array factor ``F(theta) = b(theta)^T s`` (scalar or array of angles)."""
    s = np.asarray(s, dtype=float)
    B = steered_response(theta_deg, theta0_deg, s.shape[-1], spacing_wavelengths)
    return B @ s.T


def main_lobe_gains(schedule, theta0_deg: float = 0.0, spacing_wavelengths: float = 0.5) -> np.ndarray:
    return np.abs(pattern(schedule, theta0_deg, theta0_deg, spacing_wavelengths))


def estimate_ephy(schedule, theta_eve_deg: float, mag_bins: int = 8, phase_bins: int = 8,
                  theta0_deg: float = 0.0, spacing_wavelengths: float = 0.5) -> float:
    """Entropy (bits) of the quantised eavesdropper-direction gain across sub-slots.

    Magnitudes are binned uniformly on ``[0, max_k |F_k|]``, phases uniformly
    on ``[-pi, pi)``.
    """
    sched = np.atleast_2d(np.asarray(schedule, dtype=float))
    if sched.shape[0] == 0:
        raise ValueError("empty schedule")
    F = np.atleast_1d(pattern(sched, theta_eve_deg, theta0_deg, spacing_wavelengths))
    mag = np.abs(F)
    top = mag.max()
    if top <= 0.0:
        return 0.0
    mi = np.minimum(np.floor(mag / top * mag_bins * (1 - 1e-12)), mag_bins - 1).astype(int)
    ph = np.angle(F)
    pi_ = np.minimum(np.floor((ph + np.pi) / (2 * np.pi) * phase_bins), phase_bins - 1).astype(int)
    _, counts = np.unique(mi * phase_bins + pi_, return_counts=True)
    p = counts / counts.sum()
    return float(max(0.0, -(p * np.log2(p)).sum()))


def static_peak_sidelobe(p: SltmProblem) -> float:
    """Peak masked magnitude of the uniform (all-on) static beam."""
    return masked_peak(p, np.ones(p.m))


def design_for(cfg, rng: np.random.Generator | None = None) -> tuple[SltmProblem, SltmDesign]:
    """Build, solve, round and score the SLTM design of a scenario."""
    sc = cfg.sltm
    p = build_problem(sc)
    d = solve_socp(p, sc.tol)
    d.schedule = round_schedule(d.s_relaxed, sc.subslots, rng)
    d.e_phy_bits = estimate_ephy(d.schedule, sc.ephy_theta_deg, sc.mag_bins, sc.phase_bins,
                                 sc.theta0_deg, sc.spacing_wavelengths)
    return p, d
