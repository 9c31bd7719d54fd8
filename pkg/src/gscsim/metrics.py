"""Image quality metrics: MSE, PSNR, and a perceptual feature-space
distance with a pluggable backbone.

The default backbone is a fixed-seed random convolutional pyramid so the
metric carries no external weight dependency; its absolute values are
only meaningful as relative comparisons under one backbone instance.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

PSNR_CAP_DB = 100.0


def mse(a: torch.Tensor, b: torch.Tensor, per_image: bool = False):
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    d = (a - b) ** 2
    if per_image:
        return d.reshape(d.shape[0], -1).mean(dim=1)
    return d.mean()


def psnr(a: torch.Tensor, b: torch.Tensor, per_image: bool = False):
    """PSNR in dB for intensities in [0, 1]; exact matches capped at 100.

    The batch value is the mean of per-image PSNRs so batch means always
    equal the mean of per-image metrics.
    """
    m = mse(a, b, per_image=a.dim() == 4)
    out = 10.0 * torch.log10(1.0 / m.clamp_min(1e-300))
    out = out.clamp_max(PSNR_CAP_DB)
    if per_image or a.dim() != 4:
        return out
    return out.mean()


class RandomConvPyramid(nn.Module):
    """Fixed-seed random 5-level conv feature extractor used as the default
    perceptual backbone."""

    def __init__(self, seed: int = 1234, width: int = 16, levels: int = 5):
        super().__init__()
        g = torch.Generator().manual_seed(seed)
        self.convs = nn.ModuleList()
        prev = 3
        for _ in range(levels):
            conv = nn.Conv2d(prev, width, 3, stride=2, padding=1)
            with torch.no_grad():
                conv.weight.copy_(torch.randn(conv.weight.shape, generator=g)
                                  / (prev * 9) ** 0.5)
                conv.bias.zero_()
            self.convs.append(conv)
            prev = width
        for p in self.parameters():
            p.requires_grad_(False)

    def forward(self, x):
        feats = []
        for conv in self.convs:
            x = torch.tanh(conv(x))
            feats.append(x)
        return feats


_default_backbone = None


def default_backbone() -> RandomConvPyramid:
    global _default_backbone
    if _default_backbone is None:
        _default_backbone = RandomConvPyramid().eval()
    return _default_backbone


@torch.no_grad()
def perceptual_distance(a: torch.Tensor, b: torch.Tensor, backbone=None,
                        per_image: bool = False):
    """Mean over layers of unit-normalized feature-map squared differences,
    spatially averaged."""
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    if backbone is None:
        backbone = default_backbone()
    fa = backbone(a)
    fb = backbone(b)
    totals = []
    for xa, xb in zip(fa, fb):
        na = F.normalize(xa, dim=1)
        nb = F.normalize(xb, dim=1)
        d = ((na - nb) ** 2).sum(dim=1).mean(dim=(-2, -1))  # per image
        totals.append(d)
    out = torch.stack(totals, dim=0).mean(dim=0)
    if per_image:
        return out
    return out.mean()


@dataclass
class MetricReport:
    psnr_db: float
    mse: float
    lpips: float
    n_images: int

    @staticmethod
    def compute(original: torch.Tensor, received: torch.Tensor,
                backbone=None) -> "MetricReport":
        return MetricReport(
            psnr_db=psnr(original, received).item(),
            mse=mse(original, received).item(),
            lpips=perceptual_distance(original, received, backbone).item(),
            n_images=original.shape[0],
        )
