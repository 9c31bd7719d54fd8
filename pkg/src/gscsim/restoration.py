"""Receiver-side restoration networks.

PriorExtractor condenses a (decoded, clean) image pair - or the decoded
image alone at inference - into a compact prior vector of dimension 4*C'.
RestorationNet is a four-level U-shaped stack of dynamic transformer
blocks (channel-wise transposed attention + gated feed-forward), both
modulated by the prior vector.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F


def space_to_depth(x: torch.Tensor, factor: int) -> torch.Tensor:
    """PixelUnshuffle rearrangement (C, H, W) -> (C*f^2, H/f, W/f)."""
    if x.shape[-1] % factor or x.shape[-2] % factor:
        raise ValueError(f"spatial dims {tuple(x.shape[-2:])} not divisible "
                         f"by {factor}")
    return F.pixel_unshuffle(x, factor)


def depth_to_space(x: torch.Tensor, factor: int) -> torch.Tensor:
    """Inverse of :func:`space_to_depth`."""
    return F.pixel_shuffle(x, factor)


class PriorExtractor(nn.Module):
    """Prior extraction network.

    Training mode consumes the channel-concatenated (decoded, clean) pair
    (6 channels); condition mode consumes the decoded image alone
    (3 channels). The two stems share a common downsampling trunk.
    """

    def __init__(self, cprime: int = 96, unshuffle: int = 2):
        super().__init__()
        self.cprime = cprime
        self.unshuffle = unshuffle
        c0 = max(cprime // 2, 8)
        self.stem_pair = nn.Conv2d(6 * unshuffle ** 2, c0, 3, padding=1)
        self.stem_single = nn.Conv2d(3 * unshuffle ** 2, c0, 3, padding=1)
        trunk = []
        chans = [c0, c0, cprime, cprime]
        prev = c0
        for c in chans:
            trunk += [nn.Conv2d(prev, c, 3, stride=2, padding=1), nn.ReLU()]
            prev = c
        self.trunk = nn.Sequential(*trunk)
        self.head = nn.Linear(cprime, 4 * cprime)

    def forward(self, decoded: torch.Tensor,
                clean: torch.Tensor | None = None) -> torch.Tensor:
        if clean is not None:
            if clean.shape != decoded.shape:
                raise ValueError("decoded/clean shape mismatch")
            x = space_to_depth(torch.cat([decoded, clean], dim=1),
                               self.unshuffle)
            x = self.stem_pair(x)
        else:
            x = space_to_depth(decoded, self.unshuffle)
            x = self.stem_single(x)
        x = self.trunk(x)
        x = x.mean(dim=(-2, -1))
        return self.head(x)


class ChannelLayerNorm(nn.Module):
    """LayerNorm over the channel dimension of (N, C, H, W) maps."""

    def __init__(self, dim):
        super().__init__()
        self.norm = nn.LayerNorm(dim)

    def forward(self, x):
        return self.norm(x.permute(0, 2, 3, 1)).permute(0, 3, 1, 2)


class PriorModulation(nn.Module):
    """Affine per-channel scale/shift computed from the prior vector."""

    def __init__(self, prior_dim, dim):
        super().__init__()
        self.proj = nn.Linear(prior_dim, 2 * dim)

    def forward(self, x, z):
        scale, shift = self.proj(z).chunk(2, dim=-1)
        return x * (1.0 + scale[:, :, None, None]) + shift[:, :, None, None]


class DynamicTransposedAttention(nn.Module):
    """Multi-head attention across channels (transposed attention) whose
    input is modulated by the prior vector."""

    def __init__(self, dim, num_heads, prior_dim):
        super().__init__()
        if dim % num_heads:
            raise ValueError("dim must be divisible by num_heads")
        self.num_heads = num_heads
        self.norm = ChannelLayerNorm(dim)
        self.modulate = PriorModulation(prior_dim, dim)
        self.qkv = nn.Conv2d(dim, 3 * dim, 1)
        self.qkv_dw = nn.Conv2d(3 * dim, 3 * dim, 3, padding=1,
                                groups=3 * dim)
        self.temperature = nn.Parameter(torch.ones(num_heads, 1, 1))
        self.proj = nn.Conv2d(dim, dim, 1)

    def forward(self, x, z):
        n, c, h, w = x.shape
        y = self.modulate(self.norm(x), z)
        q, k, v = self.qkv_dw(self.qkv(y)).chunk(3, dim=1)
        hd = c // self.num_heads
        q = q.reshape(n, self.num_heads, hd, h * w)
        k = k.reshape(n, self.num_heads, hd, h * w)
        v = v.reshape(n, self.num_heads, hd, h * w)
        q = F.normalize(q, dim=-1)
        k = F.normalize(k, dim=-1)
        attn = (q @ k.transpose(-2, -1)) * self.temperature
        attn = attn.softmax(dim=-1)
        out = (attn @ v).reshape(n, c, h, w)
        return x + self.proj(out)


class DynamicGatedFeedForward(nn.Module):
    """Two-branch gated feed-forward, prior-modulated."""

    def __init__(self, dim, prior_dim, expansion=2):
        super().__init__()
        hidden = dim * expansion
        self.norm = ChannelLayerNorm(dim)
        self.modulate = PriorModulation(prior_dim, dim)
        self.inner = nn.Conv2d(dim, 2 * hidden, 1)
        self.inner_dw = nn.Conv2d(2 * hidden, 2 * hidden, 3, padding=1,
                                  groups=2 * hidden)
        self.proj = nn.Conv2d(hidden, dim, 1)

    def forward(self, x, z):
        y = self.modulate(self.norm(x), z)
        a, b = self.inner_dw(self.inner(y)).chunk(2, dim=1)
        return x + self.proj(F.gelu(a) * b)


class DynamicTransformerBlock(nn.Module):
    def __init__(self, dim, num_heads, prior_dim):
        super().__init__()
        self.attn = DynamicTransposedAttention(dim, num_heads, prior_dim)
        self.ffn = DynamicGatedFeedForward(dim, prior_dim)

    def forward(self, x, z):
        return self.ffn(self.attn(x, z), z)


class BlockStack(nn.Module):
    def __init__(self, dim, num_heads, prior_dim, depth):
        super().__init__()
        self.blocks = nn.ModuleList(
            DynamicTransformerBlock(dim, num_heads, prior_dim)
            for _ in range(depth)
        )

    def forward(self, x, z):
        for blk in self.blocks:
            x = blk(x, z)
        return x


class RestorationNet(nn.Module):
    """Four-level encoder-decoder of dynamic transformer blocks with skip
    connections; adds a residual correction to the decoded image and
    clamps to [0, 1]."""

    def __init__(self, prior_dim, base_dim=32, heads=(1, 2, 4, 8),
                 blocks=(3, 5, 6, 6)):
        super().__init__()
        if len(heads) != 4 or len(blocks) != 4:
            raise ValueError("exactly four levels are required")
        c = base_dim
        dims = [c, 2 * c, 4 * c, 8 * c]
        self.stem = nn.Conv2d(3, c, 3, padding=1)
        self.enc1 = BlockStack(dims[0], heads[0], prior_dim, blocks[0])
        self.down1 = nn.Conv2d(dims[0], dims[1], 3, stride=2, padding=1)
        self.enc2 = BlockStack(dims[1], heads[1], prior_dim, blocks[1])
        self.down2 = nn.Conv2d(dims[1], dims[2], 3, stride=2, padding=1)
        self.enc3 = BlockStack(dims[2], heads[2], prior_dim, blocks[2])
        self.down3 = nn.Conv2d(dims[2], dims[3], 3, stride=2, padding=1)
        self.latent = BlockStack(dims[3], heads[3], prior_dim, blocks[3])
        self.up3 = nn.ConvTranspose2d(dims[3], dims[2], 2, stride=2)
        self.fuse3 = nn.Conv2d(2 * dims[2], dims[2], 1)
        self.dec3 = BlockStack(dims[2], heads[2], prior_dim, blocks[2])
        self.up2 = nn.ConvTranspose2d(dims[2], dims[1], 2, stride=2)
        self.fuse2 = nn.Conv2d(2 * dims[1], dims[1], 1)
        self.dec2 = BlockStack(dims[1], heads[1], prior_dim, blocks[1])
        self.up1 = nn.ConvTranspose2d(dims[1], dims[0], 2, stride=2)
        self.fuse1 = nn.Conv2d(2 * dims[0], dims[0], 1)
        self.dec1 = BlockStack(dims[0], heads[0], prior_dim, blocks[0])
        self.out = nn.Conv2d(c, 3, 3, padding=1)

    def forward(self, decoded: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
        if decoded.shape[-1] % 8 or decoded.shape[-2] % 8:
            raise ValueError("spatial dims must be divisible by 8")
        x = self.stem(decoded)
        e1 = self.enc1(x, z)
        e2 = self.enc2(self.down1(e1), z)
        e3 = self.enc3(self.down2(e2), z)
        lat = self.latent(self.down3(e3), z)
        d3 = self.dec3(self.fuse3(torch.cat([self.up3(lat), e3], dim=1)), z)
        d2 = self.dec2(self.fuse2(torch.cat([self.up2(d3), e2], dim=1)), z)
        d1 = self.dec1(self.fuse1(torch.cat([self.up1(d2), e1], dim=1)), z)
        return (decoded + self.out(d1)).clamp(0.0, 1.0)
