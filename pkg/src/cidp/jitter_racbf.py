"""Per-hop robust discrete-time barrier filter for real-time jitter.

Model: a packet carries its accumulated jitter ``d`` (ms).  At each hop the
raw hop delay ``v`` is compared with the per-hop budget ``t_align``.  Early
packets are held for ``delta = t_align - v`` so they leave on the nominal
schedule; late packets cannot be pulled back and their excess
``e = v - t_align`` accumulates into ``d``.

The barrier is ``h = dmax - d``.  The per-hop QP

    min delta  s.t.  delta >= 0,  departure no earlier than nominal,
                     h(next) >= (1 - alpha) h

has the closed-form solution above whenever ``e <= alpha * h``; otherwise no
hold delay can restore the condition and the hop is infeasible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import racbf_hops

_REL = 1e-12


class BarrierViolation(RuntimeError):
    """The barrier was already non-positive on entry."""


class DisturbanceBoundExceeded(RuntimeError):
    """Late excess larger than ``alpha * h``; the barrier condition cannot hold."""


@dataclass(frozen=True)
class JitterState:
    flow: int
    d_ms: float
    dmax_ms: float

    @property
    def h_ms(self) -> float:
        return self.dmax_ms - self.d_ms


@dataclass(frozen=True)
class HoldResult:
    delta_ms: float
    excess_ms: float
    next: JitterState


def racbf_delay(state: JitterState, v_ms: float, t_align_ms: float, alpha: float) -> HoldResult:
    h = state.h_ms
    if h <= 0:
        raise BarrierViolation(f"flow {state.flow}: barrier h = {h:.6g} <= 0 on entry")
    if v_ms < 0:
        raise ValueError("hop delay must be non-negative")
    delta = max(0.0, t_align_ms - v_ms)
    e = max(0.0, v_ms - t_align_ms)
    if e > alpha * h * (1.0 + _REL):
        raise DisturbanceBoundExceeded(
            f"flow {state.flow}: late excess {e:.6g} ms exceeds alpha*h = {alpha * h:.6g} ms "
            f"(v = {v_ms:.6g}, t_align = {t_align_ms:.6g})")
    return HoldResult(delta, e, JitterState(state.flow, state.d_ms + e, state.dmax_ms))


def filter_packet(v_ms: np.ndarray, t_align_ms: float, dmax_ms: float, alpha: float, flow: int = -1):
    """Apply :func:`racbf_delay` along all hops of one packet, starting from ``d = 0``.

    Returns ``(delta, d_before, d_after)`` arrays.
    """
    delta, d_before, d_after, bad = racbf_hops(np.asarray(v_ms, dtype=float), t_align_ms,
                                               dmax_ms, alpha, 0.0)
    if bad >= 0:
        h = dmax_ms - d_before[bad]
        if h <= 0:
            raise BarrierViolation(f"flow {flow}: barrier h = {h:.6g} <= 0 at hop {bad}")
        raise DisturbanceBoundExceeded(
            f"flow {flow}: hop {bad} excess {v_ms[bad] - t_align_ms:.6g} ms > alpha*h = {alpha * h:.6g} ms")
    return delta, d_before, d_after


def default_t_align(dmax_ms: float, hops: int) -> float:
    return dmax_ms / (hops + 1)


def default_v_max(t_align_ms: float, dmax_ms: float, alpha: float, hops: int) -> float:
    """Largest hop-delay support for which every hop of an ``hops``-hop path stays feasible.

    With worst-case excess at every hop, ``h`` after ``k`` hops is
    ``(1-alpha)^k dmax``; the last hop's admissible excess is the smallest.
    """
    return t_align_ms + alpha * (1.0 - alpha) ** (max(hops, 1) - 1) * dmax_ms


def sample_hop_delays(rng: np.random.Generator, n: int, v_max_ms: float, scale_ms: float) -> np.ndarray:
    """Truncated exponential on ``[0, v_max]`` with scale ``scale_ms`` (inverse CDF)."""
    u = rng.random(n)
    cap = 1.0 - np.exp(-v_max_ms / scale_ms)
    return -scale_ms * np.log1p(-u * cap)


def verify_invariance(h_before, h_after, alpha: float, dmax_ms: float | None = None, rel: float = 1e-9):
    """Check ``h(t+1) >= (1-alpha) h(t)`` (and ``h >= 0``) at every step.

    Returns ``(ok, first_bad_index)`` with index ``None`` when all hold.
    """
    hb = np.asarray(h_before, dtype=float)
    ha = np.asarray(h_after, dtype=float)
    tol = rel * np.maximum(1.0, np.abs(hb))
    bad = (ha < (1.0 - alpha) * hb - tol) | (ha < -tol) | (hb < -tol)
    idx = np.flatnonzero(bad)
    if idx.size:
        return False, int(idx[0])
    return True, None


def trajectory_states(h0: float, h_seq) -> tuple[np.ndarray, np.ndarray]:
    """Turn a barrier trajectory ``h(0), h(1), ...`` into (before, after) pairs."""
    h = np.concatenate([[h0], np.asarray(h_seq, dtype=float)])
    return h[:-1], h[1:]
