"""Cross-layer anonymity stack: routing, jitter barrier filter, SLTM beamforming, adversary."""

__version__ = "0.1.0"
