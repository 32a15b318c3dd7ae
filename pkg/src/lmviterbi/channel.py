"""BPSK over real AWGN, Eb/N0 calibration, and closed-form baselines.

A symbol frame is a 1-D float array, one real symbol per coded bit, with
unit nominal energy.  Noise streams come from numpy's PCG64 seeded through
``SeedSequence``; per-frame substreams derive from (seed, *indices) so sweep
scheduling never perturbs noise realizations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "NoiseSpec",
    "bpsk_modulate",
    "ebn0_to_sigma",
    "awgn_apply",
    "theoretical_uncoded_ber",
    "derive_frame_seed",
]


def bpsk_modulate(bits) -> np.ndarray:
    """Map coded bits to antipodal symbols: 0 -> +1, 1 -> -1."""
    b = np.asarray(bits, dtype=np.float64).ravel()
    return 1.0 - 2.0 * b


def ebn0_to_sigma(ebn0_db: float, rate: float | Fraction) -> float:
    """Per-dimension noise sigma for a given Eb/N0 and code rate.

    Unit-energy symbols carry R information bits each, so
    sigma^2 = 1 / (2 * R * 10^(Eb/N0[dB]/10)).
    """
    r = float(rate)
    if not 0.0 < r <= 1.0:
        raise ValueError("rate must be in (0, 1]")
    gamma = 10.0 ** (ebn0_db / 10.0)
    return math.sqrt(1.0 / (2.0 * r * gamma))


@dataclass(frozen=True)
class NoiseSpec:
    """AWGN parameters: per-dimension sigma plus the seed that fixes the draw."""

    sigma: float
    ebn0_db: float
    seed: int

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")

    @classmethod
    def from_ebn0(cls, ebn0_db: float, rate: float | Fraction, seed: int) -> "NoiseSpec":
        return cls(sigma=ebn0_to_sigma(ebn0_db, rate), ebn0_db=ebn0_db, seed=seed)


def derive_frame_seed(master_seed: int, *indices: int) -> int:
    """Deterministic 64-bit substream seed for (master_seed, *indices)."""
    ss = np.random.SeedSequence(entropy=(int(master_seed), *map(int, indices)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def awgn_apply(frame, noise: NoiseSpec) -> np.ndarray:
    """Add i.i.d. zero-mean Gaussian noise of std ``noise.sigma``.

    Identical NoiseSpec (same seed) reproduces the identical output.
    """
    x = np.asarray(frame, dtype=np.float64).ravel()
    if noise.sigma == 0.0:
        return x.copy()
    rng = np.random.default_rng(np.random.SeedSequence(entropy=noise.seed))
    return x + rng.normal(0.0, noise.sigma, size=x.size)


def theoretical_uncoded_ber(ebn0_db: float) -> float:
    """Closed-form BER of uncoded BPSK on AWGN: Q(sqrt(2 * Eb/N0))."""
    gamma = 10.0 ** (ebn0_db / 10.0)
    return 0.5 * math.erfc(math.sqrt(gamma))
