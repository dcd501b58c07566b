"""Pure numpy implementations of the hot kernels.

Each function here has a drop-in twin in ``_kernels.pyx``; both must return
identical results (the test-suite checks this when the extension is built).
"""
from __future__ import annotations

import numpy as np


def link_argmax(Q: np.ndarray, li: np.ndarray, lj: np.ndarray, eligible: np.ndarray):
    """Per link, the eligible flow with the largest differential backlog.

    Returns ``(flow, weight)`` arrays; ``flow`` is -1 where no eligible flow
    has a strictly positive weight.  Ties go to the lowest flow id.
    """
    L = len(li)
    if L == 0 or Q.shape[1] == 0:
        return np.full(L, -1, dtype=np.int64), np.zeros(L, dtype=np.int64)
    W = Q[li].astype(np.int64) - Q[lj].astype(np.int64)
    floor = np.iinfo(np.int64).min
    W = np.where(eligible[None, :], W, floor)
    best = np.argmax(W, axis=1).astype(np.int64)
    w = W[np.arange(L), best]
    best[w <= 0] = -1
    w = np.where(w <= 0, 0, w)
    return best, w.astype(np.int64)


def soc_barrier(R: np.ndarray, I: np.ndarray, s: np.ndarray, eta: float):
    """Value, gradient and Hessian of ``-sum_l log(eta^2 - (R_l s)^2 - (I_l s)^2)``.

    The variable vector is ``(s, eta)``.  Returns ``None`` outside the cone
    interior.
    """
    ur = R @ s
    ui = I @ s
    D = eta * eta - ur * ur - ui * ui
    if np.any(D <= 0.0) or eta <= 0.0:
        return None
    M = len(s)
    inv = 1.0 / D
    # grad of D wrt s: -2(ur R + ui I); wrt eta: 2 eta
    Gs = -2.0 * (ur[:, None] * R + ui[:, None] * I)
    grad = np.empty(M + 1)
    grad[:M] = -(inv[:, None] * Gs).sum(axis=0)
    grad[M] = -(2.0 * eta * inv).sum()
    H = np.empty((M + 1, M + 1))
    Gw = Gs * inv[:, None]
    H[:M, :M] = Gw.T @ Gw + 2.0 * ((R * inv[:, None]).T @ R + (I * inv[:, None]).T @ I)
    cross = (Gw * (2.0 * eta * inv)[:, None]).sum(axis=0)
    H[:M, M] = cross
    H[M, :M] = cross
    H[M, M] = ((2.0 * eta * inv) ** 2).sum() - 2.0 * inv.sum()
    return -np.log(D).sum(), grad, H


def racbf_hops(v: np.ndarray, t_align: float, dmax: float, alpha: float, d0: float = 0.0):
    """Run the per-hop barrier filter over one packet's hop delays.

    Returns ``(delta, d_before, d_after, bad)`` where ``bad`` is the index of
    the first infeasible hop (or -1).  Hops after ``bad`` are left as zeros.
    """
    H = len(v)
    delta = np.zeros(H)
    d_before = np.zeros(H)
    d_after = np.zeros(H)
    d = d0
    for k in range(H):
        h = dmax - d
        if h <= 0.0:
            return delta, d_before, d_after, k
        e = v[k] - t_align
        if e < 0.0:
            delta[k] = -e
            e = 0.0
        if e > alpha * h * (1.0 + 1e-12):
            d_before[k] = d
            return delta, d_before, d_after, k
        d_before[k] = d
        d = d + e
        d_after[k] = d
    return delta, d_before, d_after, -1
