"""Physical channel simulation: power normalization, AWGN, Rayleigh fading
with zero-forcing equalization under perfect CSI.

Signals use a real-pair layout: a length-k real vector holds k/2 complex
samples as interleaved (real, imag) components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

DEEP_FADE_EPS = 1e-12

AWGN = "AWGN"
RAYLEIGH = "RAYLEIGH"


@dataclass
class ChannelConfig:
    kind: str = AWGN
    snr_db: float = 10.0
    power: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (AWGN, RAYLEIGH):
            raise ValueError(f"unknown channel kind: {self.kind!r}")
        if not math.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")
        if self.power <= 0:
            raise ValueError("power must be positive")


def as_complex(f: torch.Tensor) -> torch.Tensor:
    """View a real-pair signal (..., k) as complex samples (..., k/2)."""
    if f.shape[-1] % 2 != 0:
        raise ValueError("real-pair signal length must be even")
    return torch.view_as_complex(f.reshape(*f.shape[:-1], -1, 2).contiguous())


def as_real_pair(c: torch.Tensor) -> torch.Tensor:
    """Inverse of :func:`as_complex`."""
    return torch.view_as_real(c).reshape(*c.shape[:-1], -1)


def power_normalize(f: torch.Tensor, power: float = 1.0) -> torch.Tensor:
    """Scale each signal vector so its average power per complex sample
    equals ``power`` exactly. Zero vectors are left untouched."""
    if not torch.isfinite(f).all():
        raise ValueError("non-finite signal")
    k_c = f.shape[-1] // 2
    cur = f.pow(2).sum(dim=-1, keepdim=True) / k_c
    scale = torch.where(cur > 0, torch.sqrt(power / cur.clamp_min(1e-300)),
                        torch.ones_like(cur))
    return f * scale


def snr_to_noise_power(snr_db: float, power: float = 1.0) -> float:
    """Noise power per complex sample for a given SNR in dB."""
    if power <= 0:
        raise ValueError("power must be positive")
    return power / (10.0 ** (snr_db / 10.0))


def transmit_awgn(f: torch.Tensor, sigma2: float,
                  generator: torch.Generator | None = None) -> torch.Tensor:
    """Add white Gaussian noise with variance sigma2 per complex sample
    (sigma2/2 per real component)."""
    if sigma2 == 0:
        return f.clone()
    noise = torch.randn(f.shape, generator=generator, dtype=f.dtype) \
        * math.sqrt(sigma2 / 2.0)
    return f + noise


def sample_csi(k_c: int, generator: torch.Generator | None = None,
               dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Draw k_c i.i.d. unit-variance circularly-symmetric complex Gaussian
    fading coefficients (|h| is Rayleigh with scale 1/sqrt(2))."""
    if k_c < 1:
        raise ValueError("k_c must be >= 1")
    re = torch.randn(k_c, generator=generator, dtype=dtype)
    im = torch.randn(k_c, generator=generator, dtype=dtype)
    return torch.complex(re, im) / math.sqrt(2.0)


def transmit_fading(f: torch.Tensor, h: torch.Tensor, sigma2: float,
                    generator: torch.Generator | None = None) -> torch.Tensor:
    """Element-wise complex fading h * f plus AWGN of variance sigma2."""
    fc = as_complex(f)
    if h.shape[-1] != fc.shape[-1]:
        raise ValueError(
            f"CSI length {h.shape[-1]} != complex sample count {fc.shape[-1]}")
    out = as_real_pair(fc * h)
    return transmit_awgn(out, sigma2, generator)


def equalize(f_hat: torch.Tensor, h: torch.Tensor,
             return_flags: bool = False):
    """Zero-forcing equalization with perfect CSI.

    Samples in a deep fade (|h| below DEEP_FADE_EPS) are divided with a
    regularized inverse h* / (|h|^2 + eps) instead and flagged.
    """
    fc = as_complex(f_hat)
    if h.shape[-1] != fc.shape[-1]:
        raise ValueError("CSI length mismatch")
    mag2 = h.real ** 2 + h.imag ** 2
    deep = mag2 < DEEP_FADE_EPS ** 2
    safe_h = torch.where(deep, torch.ones_like(h), h)
    out = torch.where(deep, fc * h.conj() / (mag2 + DEEP_FADE_EPS),
                      fc / safe_h)
    out = as_real_pair(out)
    if return_flags:
        return out, deep
    return out


def substream_generator(*parts: int) -> torch.Generator:
    """Deterministic per-call generator derived from integer identifiers,
    so concurrent transmissions are reproducible and independent."""
    mix = 0x9E3779B97F4A7C15
    state = 0
    for p in parts:
        state = (state ^ (int(p) + mix)) * 0xBF58476D1CE4E5B9 % (1 << 63)
    g = torch.Generator()
    g.manual_seed(state)
    return g


class Channel:
    """Seeded channel front-end applying normalization, transmission and
    (for fading) perfect-CSI equalization.

    Each call uses a substream derived from (seed, stream) so results do
    not depend on call order across concurrent users.
    """

    def __init__(self, config: ChannelConfig):
        self.config = config

    def transmit(self, f: torch.Tensor, stream: int = 0,
                 snr_db: float | None = None) -> torch.Tensor:
        cfg = self.config
        g = substream_generator(cfg.seed, stream)
        fp = power_normalize(f, cfg.power)
        sigma2 = snr_to_noise_power(
            cfg.snr_db if snr_db is None else snr_db, cfg.power)
        if cfg.kind == AWGN:
            return transmit_awgn(fp, sigma2, g)
        k_c = f.shape[-1] // 2
        h = sample_csi(k_c, g, dtype=f.dtype)
        f_hat = transmit_fading(fp, h, sigma2, g)
        return equalize(f_hat, h)
