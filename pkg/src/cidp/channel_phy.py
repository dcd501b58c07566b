"""Link physics: log-distance path loss, Rician fading, SNR gating, ULA response.

The SINR is noise limited (no interference term), so ``sinr_db`` is the SNR
of the link.  Fading is redrawn i.i.d. per slot and per directed link.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

REF_DISTANCE_M = 1.0


@dataclass(frozen=True)
class LinkRealization:
    tx: int
    rx: int
    gain_db: float
    sinr_db: float
    active: bool


def rician_params(k_db: float) -> tuple[float, float]:
    """(LOS amplitude, per-component scatter std) for unit mean power."""
    k = 10.0 ** (k_db / 10.0)
    return float(np.sqrt(k / (k + 1.0))), float(np.sqrt(1.0 / (2.0 * (k + 1.0))))


def rician_draw(rng: np.random.Generator, k_db: float, size=None) -> np.ndarray:
    """Complex Rician samples with E|h|^2 = 1 and zero LOS phase."""
    los, sig = rician_params(k_db)
    re = rng.standard_normal(size)
    im = rng.standard_normal(size)
    return los + sig * (re + 1j * im)


def link_gain(distance: float, fading_draw: complex, pathloss_exponent: float,
              ref_gain_db: float = -40.0) -> float:
    """Channel gain in dB at ``distance`` metres for one fading realisation."""
    if not distance > 0:
        raise ValueError(f"distance must be positive, got {distance}")
    return (-10.0 * pathloss_exponent * np.log10(distance / REF_DISTANCE_M)
            + 20.0 * np.log10(abs(fading_draw)) + ref_gain_db)


def link_gain_matrix(dist: np.ndarray, fading: np.ndarray, pathloss_exponent: float,
                     ref_gain_db: float) -> np.ndarray:
    """Vectorised :func:`link_gain`; entries with ``dist <= 0`` are ``-inf``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        g = (-10.0 * pathloss_exponent * np.log10(np.where(dist > 0, dist, 1.0) / REF_DISTANCE_M)
             + 20.0 * np.log10(np.abs(fading)) + ref_gain_db)
    return np.where(dist > 0, g, -np.inf)


def distance_matrix(positions: np.ndarray) -> np.ndarray:
    diff = positions[:, None, :] - positions[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


class Channel:
    """Per-slot link realisations for a static node placement."""

    def __init__(self, network, positions: np.ndarray):
        self.net = network
        self.positions = np.asarray(positions, dtype=float)
        self.dist = distance_matrix(self.positions)
        self.n = len(self.positions)

    def mean_snr_db(self) -> np.ndarray:
        """SNR with |h| = 1; the diagonal is ``-inf``."""
        g = link_gain_matrix(self.dist, np.ones_like(self.dist), self.net.pathloss_exponent,
                             self.net.ref_gain_db)
        return self.net.tx_power_dbm + g - self.net.noise_dbm

    def reference_links(self) -> np.ndarray:
        """Links that are active at the mean (fade-free) SNR."""
        return self.mean_snr_db() >= self.net.gamma0_db

    def snr_db(self, fading: np.ndarray) -> np.ndarray:
        g = link_gain_matrix(self.dist, fading, self.net.pathloss_exponent, self.net.ref_gain_db)
        return self.net.tx_power_dbm + g - self.net.noise_dbm

    def active(self, fading: np.ndarray) -> np.ndarray:
        return self.snr_db(fading) >= self.net.gamma0_db

    def draw_fading(self, rng: np.random.Generator) -> np.ndarray:
        return rician_draw(rng, self.net.rician_k_db, (self.n, self.n))

    def link_state(self, tx: int, rx: int, fading_draw: complex) -> LinkRealization:
        if tx == rx:
            raise ValueError("tx and rx must differ")
        gain = link_gain(self.dist[tx, rx], fading_draw, self.net.pathloss_exponent,
                         self.net.ref_gain_db)
        sinr = self.net.tx_power_dbm + gain - self.net.noise_dbm
        return LinkRealization(tx, rx, float(gain), float(sinr), bool(sinr >= self.net.gamma0_db))


def array_response(theta_deg, m_elements: int, spacing_wavelengths: float = 0.5) -> np.ndarray:
    """ULA steering vector(s) ``exp(j 2π m d sin θ)``, m = 0..M-1.

    A scalar angle gives shape ``(M,)``; an array of angles gives ``(L, M)``.
    """
    if m_elements < 2:
        raise ValueError("array needs at least two elements")
    theta = np.radians(np.asarray(theta_deg, dtype=float))
    phase = 2.0 * np.pi * spacing_wavelengths * np.multiply.outer(np.sin(theta), np.arange(m_elements))
    return np.exp(1j * phase)


def steered_response(theta_deg, theta0_deg: float, m_elements: int,
                     spacing_wavelengths: float = 0.5) -> np.ndarray:
    """Response with element phases fixed to co-phase the main lobe at ``theta0_deg``.

    Equals :func:`array_response` for broadside ``theta0_deg = 0``.
    """
    a = array_response(theta_deg, m_elements, spacing_wavelengths)
    return a * np.conj(array_response(theta0_deg, m_elements, spacing_wavelengths))
