"""Gray-mapped 4-QAM (QPSK) modulation with exact per-bit LLR demodulation."""

from __future__ import annotations

import numpy as np

_A = 1.0 / np.sqrt(2.0)

# Gray mapping: bit pair (b0, b1) -> ((1-2*b0) + 1j*(1-2*b1)) / sqrt(2).
CONSTELLATION = np.array(
    [(1 - 2 * b0) * _A + 1j * (1 - 2 * b1) * _A
     for b0 in (0, 1) for b1 in (0, 1)]
)


def qam_modulate(bits: np.ndarray) -> np.ndarray:
    """Map a bit array (even length) to unit-average-power 4-QAM symbols."""
    bits = np.asarray(bits, dtype=np.int8)
    if bits.size % 2:
        raise ValueError("bit count must be even for 4-QAM")
    b = bits.reshape(-1, 2)
    return (1 - 2 * b[:, 0]) * _A + 1j * (1 - 2 * b[:, 1]) * _A


def qam_demodulate(symbols: np.ndarray, sigma2) -> np.ndarray:
    """Exact per-bit LLRs (positive favors bit 0) under complex Gaussian
    noise of per-sample variance sigma2 (scalar or per-symbol array)."""
    symbols = np.asarray(symbols)
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=np.float64),
                             symbols.shape)
    # Per real dimension: amplitude A, noise variance sigma2/2.
    llr_b0 = 4.0 * _A * symbols.real / sigma2
    llr_b1 = 4.0 * _A * symbols.imag / sigma2
    return np.stack([llr_b0, llr_b1], axis=-1).reshape(-1)


def hard_bits(llrs: np.ndarray) -> np.ndarray:
    return (np.asarray(llrs) < 0).astype(np.int8)
