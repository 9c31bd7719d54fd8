"""Swin-Transformer joint source-channel codec.

Encoder: 4x4 patch partition -> linear embedding -> swin stage 1 ->
2x2 patch merging -> swin stage 2 -> projection to C channels, giving a
(H/8, W/8, C) semantic symbol map. The decoder mirrors the encoder.

The channel coder is a fixed (non-trainable) affine map with random
orthonormal rows; its pseudo-inverse is the paired channel decoder.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import torch
import torch.nn as nn
import torch.nn.functional as F

from . import channel as ch


@dataclass
class CodecConfig:
    embed_dim: int = 32            # C
    window_size: int = 2
    depths: tuple = (2, 2)         # swin layers per stage (W-MSA/SW-MSA pairs)
    heads: tuple = (4, 8)
    mlp_ratio: int = 4
    compression_ratio: float = 1.0 / 6.0   # k / n
    learning_rate: float = 1e-4
    batch_size: int = 32
    train_snr_db: tuple = (1.0, 13.0)
    coder_seed: int = 7

    def __post_init__(self):
        if not (0.0 < self.compression_ratio <= 1.0):
            raise ValueError("compression_ratio must be in (0, 1]")
        if len(self.depths) != 2 or len(self.heads) != 2:
            raise ValueError("exactly two stages are supported")

    def to_dict(self):
        d = asdict(self)
        d["depths"] = list(self.depths)
        d["heads"] = list(self.heads)
        d["train_snr_db"] = list(self.train_snr_db)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("depths", "heads", "train_snr_db"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def patch_partition(image: torch.Tensor, patch: int = 4) -> torch.Tensor:
    """(N, 3, H, W) -> (N, H/p, W/p, 3*p*p) token grid.

    Each token holds the raw values of its patch in raster order, the 3
    channel values of each pixel kept together.
    """
    n, c, h, w = image.shape
    if h % patch or w % patch:
        raise ValueError(f"H={h}, W={w} not divisible by patch size {patch}")
    x = image.reshape(n, c, h // patch, patch, w // patch, patch)
    # (N, gh, gw, ph, pw, C) then flatten pixel-major
    x = x.permute(0, 2, 4, 3, 5, 1).contiguous()
    return x.reshape(n, h // patch, w // patch, patch * patch * c)


def patch_reassemble(tokens: torch.Tensor, patch: int = 4,
                     channels: int = 3) -> torch.Tensor:
    """Inverse of :func:`patch_partition`."""
    n, gh, gw, d = tokens.shape
    if d != patch * patch * channels:
        raise ValueError("token width does not match patch layout")
    x = tokens.reshape(n, gh, gw, patch, patch, channels)
    x = x.permute(0, 5, 1, 3, 2, 4).contiguous()
    return x.reshape(n, channels, gh * patch, gw * patch)


def window_partition(x: torch.Tensor, ws: int) -> torch.Tensor:
    """(N, H, W, C) -> (N * nw, ws*ws, C)."""
    n, h, w, c = x.shape
    if h % ws or w % ws:
        raise ValueError(f"grid {h}x{w} not tileable by window {ws}")
    x = x.reshape(n, h // ws, ws, w // ws, ws, c)
    x = x.permute(0, 1, 3, 2, 4, 5).contiguous()
    return x.reshape(-1, ws * ws, c)


def window_reverse(wins: torch.Tensor, ws: int, h: int, w: int) -> torch.Tensor:
    n = wins.shape[0] // ((h // ws) * (w // ws))
    x = wins.reshape(n, h // ws, w // ws, ws, ws, -1)
    x = x.permute(0, 1, 3, 2, 4, 5).contiguous()
    return x.reshape(n, h, w, -1)


def shift_attention_mask(h: int, w: int, ws: int, shift: int,
                         device=None) -> torch.Tensor:
    """Standard cyclic-shift mask: -inf between tokens that were not
    spatially adjacent before the shift. Shape (nw, ws*ws, ws*ws)."""
    img = torch.zeros(1, h, w, 1, device=device)
    cnt = 0
    for hs in (slice(0, -ws), slice(-ws, -shift), slice(-shift, None)):
        for wsl in (slice(0, -ws), slice(-ws, -shift), slice(-shift, None)):
            img[:, hs, wsl, :] = cnt
            cnt += 1
    wins = window_partition(img, ws).squeeze(-1)  # (nw, ws*ws)
    mask = wins.unsqueeze(1) - wins.unsqueeze(2)
    return mask.masked_fill(mask != 0, float("-inf")).masked_fill(mask == 0, 0.0)


class WindowAttention(nn.Module):
    """Multi-head self-attention inside square windows (no positional bias)."""

    def __init__(self, dim, num_heads):
        super().__init__()
        if dim % num_heads:
            raise ValueError("dim must be divisible by num_heads")
        self.num_heads = num_heads
        self.scale = (dim // num_heads) ** -0.5
        self.qkv = nn.Linear(dim, dim * 3)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x, mask=None):
        b, t, c = x.shape
        qkv = self.qkv(x).reshape(b, t, 3, self.num_heads, c // self.num_heads)
        q, k, v = qkv.permute(2, 0, 3, 1, 4)
        attn = (q @ k.transpose(-2, -1)) * self.scale
        if mask is not None:
            nw = mask.shape[0]
            attn = attn.reshape(b // nw, nw, self.num_heads, t, t)
            attn = attn + mask.unsqueeze(0).unsqueeze(2)
            attn = attn.reshape(b, self.num_heads, t, t)
        attn = attn.softmax(dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, t, c)
        return self.proj(out)


class SwinLayer(nn.Module):
    """One attention + MLP sub-layer pair; shifted windows on odd layers."""

    def __init__(self, dim, num_heads, window_size, shifted, mlp_ratio=4):
        super().__init__()
        self.window_size = window_size
        self.shift = max(1, window_size // 2) if shifted else 0
        self.norm1 = nn.LayerNorm(dim)
        self.attn = WindowAttention(dim, num_heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, mlp_ratio * dim),
            nn.ReLU(),
            nn.Linear(mlp_ratio * dim, dim),
        )

    def forward(self, x):
        n, h, w, c = x.shape
        ws = self.window_size
        if h % ws or w % ws:
            raise ValueError(f"grid {h}x{w} not tileable by window {ws}")
        y = self.norm1(x)
        if self.shift:
            y = torch.roll(y, shifts=(-self.shift, -self.shift), dims=(1, 2))
            mask = shift_attention_mask(h, w, ws, self.shift, device=x.device)
        else:
            mask = None
        wins = window_partition(y, ws)
        wins = self.attn(wins, mask)
        y = window_reverse(wins, ws, h, w)
        if self.shift:
            y = torch.roll(y, shifts=(self.shift, self.shift), dims=(1, 2))
        x = x + y
        x = x + self.mlp(self.norm2(x))
        return x


class SwinStage(nn.Module):
    """Stack of swin layers alternating regular and shifted windows."""

    def __init__(self, dim, depth, num_heads, window_size, mlp_ratio=4):
        super().__init__()
        self.layers = nn.ModuleList(
            SwinLayer(dim, num_heads, window_size, shifted=(i % 2 == 1),
                      mlp_ratio=mlp_ratio)
            for i in range(depth)
        )

    def forward(self, x):
        for layer in self.layers:
            x = layer(x)
        return x


class PatchMerge(nn.Module):
    """Concatenate 2x2 neighborhoods (4C) and reduce linearly to 2C."""

    def __init__(self, dim):
        super().__init__()
        self.reduce = nn.Linear(4 * dim, 2 * dim)

    def forward(self, x):
        n, h, w, c = x.shape
        if h % 2 or w % 2:
            raise ValueError(f"grid {h}x{w} has odd side, cannot merge 2x2")
        x = x.reshape(n, h // 2, 2, w // 2, 2, c)
        x = x.permute(0, 1, 3, 2, 4, 5).reshape(n, h // 2, w // 2, 4 * c)
        return self.reduce(x)


class PatchSplit(nn.Module):
    """Inverse of PatchMerge: expand 2C -> 4C then scatter into 2x2."""

    def __init__(self, dim):
        super().__init__()
        # dim is the output channel count C; input is 2C
        self.expand = nn.Linear(2 * dim, 4 * dim)

    def forward(self, x):
        n, h, w, _ = x.shape
        x = self.expand(x)
        c = x.shape[-1] // 4
        x = x.reshape(n, h, w, 2, 2, c)
        x = x.permute(0, 1, 3, 2, 4, 5).reshape(n, 2 * h, 2 * w, c)
        return x


class SemanticEncoder(nn.Module):
    """Image -> (N, H/8, W/8, C) semantic symbols."""

    def __init__(self, cfg: CodecConfig):
        super().__init__()
        c = cfg.embed_dim
        self.cfg = cfg
        self.embed = nn.Linear(48, c)
        self.stage1 = SwinStage(c, cfg.depths[0], cfg.heads[0],
                                cfg.window_size, cfg.mlp_ratio)
        self.merge = PatchMerge(c)
        self.stage2 = SwinStage(2 * c, cfg.depths[1], cfg.heads[1],
                                cfg.window_size, cfg.mlp_ratio)
        self.out_proj = nn.Linear(2 * c, c)

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        n, _, h, w = image.shape
        if h % 8 or w % 8:
            raise ValueError(f"H={h}, W={w} must be divisible by 8")
        x = patch_partition(image)
        x = self.embed(x)
        x = self.stage1(x)
        x = self.merge(x)
        x = self.stage2(x)
        return self.out_proj(x)


class SemanticDecoder(nn.Module):
    """(N, H/8, W/8, C) symbols -> image in [0, 1]; mirror of the encoder."""

    def __init__(self, cfg: CodecConfig):
        super().__init__()
        c = cfg.embed_dim
        self.cfg = cfg
        self.in_proj = nn.Linear(c, 2 * c)
        self.stage2 = SwinStage(2 * c, cfg.depths[1], cfg.heads[1],
                                cfg.window_size, cfg.mlp_ratio)
        self.split = PatchSplit(c)
        self.stage1 = SwinStage(c, cfg.depths[0], cfg.heads[0],
                                cfg.window_size, cfg.mlp_ratio)
        self.unembed = nn.Linear(c, 48)

    def forward(self, m: torch.Tensor) -> torch.Tensor:
        x = self.in_proj(m)
        x = self.stage2(x)
        x = self.split(x)
        x = self.stage1(x)
        x = self.unembed(x)
        return patch_reassemble(x).clamp(0.0, 1.0)


class FixedChannelCoder:
    """Non-trainable affine channel coder.

    Encoding projects the flattened symbol map onto k random orthonormal
    rows; decoding applies the transpose (the pseudo-inverse). The matrix
    is drawn once from a seed and persisted with the model.
    """

    def __init__(self, symbol_shape, k: int, seed: int = 7,
                 weight: torch.Tensor | None = None):
        gh, gw, c = symbol_shape
        d = gh * gw * c
        if k > d:
            raise ValueError(
                f"channel dimension k={k} exceeds flattened symbol "
                f"dimension {d}; lower the compression ratio or raise C")
        if k % 2:
            raise ValueError("k must be even (real-pair complex layout)")
        self.symbol_shape = tuple(symbol_shape)
        self.k = k
        self.seed = seed
        if weight is None:
            g = torch.Generator().manual_seed(seed)
            a = torch.randn(d, k, generator=g, dtype=torch.float64)
            q, _ = torch.linalg.qr(a)
            weight = q.T.to(torch.float32)   # (k, d), orthonormal rows
        if weight.shape != (k, d):
            raise ValueError("weight shape mismatch")
        self.weight = weight

    @staticmethod
    def for_config(image_hw, cfg: CodecConfig) -> "FixedChannelCoder":
        h, w = image_hw
        n_dim = 3 * h * w
        k = int(round(cfg.compression_ratio * n_dim))
        return FixedChannelCoder((h // 8, w // 8, cfg.embed_dim), k,
                                 seed=cfg.coder_seed)

    def encode(self, symbols: torch.Tensor) -> torch.Tensor:
        n = symbols.shape[0]
        flat = symbols.reshape(n, -1)
        if flat.shape[1] != self.weight.shape[1]:
            raise ValueError("symbol shape does not match coder")
        return flat @ self.weight.T

    def decode(self, f_hat: torch.Tensor) -> torch.Tensor:
        if f_hat.shape[-1] != self.k:
            raise ValueError(f"expected length-{self.k} signal, "
                             f"got {f_hat.shape[-1]}")
        n = f_hat.shape[0]
        flat = f_hat @ self.weight
        return flat.reshape(n, *self.symbol_shape)


def decoder_loss(original: torch.Tensor, decoded: torch.Tensor) -> torch.Tensor:
    """Mean squared error over all image elements."""
    if original.shape != decoded.shape:
        raise ValueError("shape mismatch")
    return F.mse_loss(decoded, original)


class JsccCodec:
    """Encoder + fixed channel coder + decoder bundle for one image size."""

    def __init__(self, cfg: CodecConfig, image_hw=(32, 32)):
        self.cfg = cfg
        self.image_hw = tuple(image_hw)
        self.encoder = SemanticEncoder(cfg)
        self.decoder = SemanticDecoder(cfg)
        self.coder = FixedChannelCoder.for_config(image_hw, cfg)

    def eval(self):
        self.encoder.eval()
        self.decoder.eval()
        return self

    def parameters(self):
        yield from self.encoder.parameters()
        yield from self.decoder.parameters()

    @torch.no_grad()
    def transmit(self, images: torch.Tensor, channel: ch.Channel,
                 stream: int = 0, snr_db: float | None = None) -> torch.Tensor:
        """Full inference-mode pipeline image -> decoded image."""
        s = self.encoder(images)
        f = self.coder.encode(s)
        f_hat = channel.transmit(f, stream=stream, snr_db=snr_db)
        m = self.coder.decode(f_hat)
        return self.decoder(m)


def train_codec(dataset: torch.Tensor, cfg: CodecConfig,
                channel_cfg: ch.ChannelConfig, steps: int = 500,
                seed: int = 0, log_every: int = 50,
                log=print) -> JsccCodec:
    """End-to-end training with per-batch SNR drawn uniformly from the
    configured training range."""
    torch.manual_seed(seed)
    codec = JsccCodec(cfg, image_hw=dataset.shape[-2:])
    opt = torch.optim.Adam(codec.parameters(), lr=cfg.learning_rate)
    channel = ch.Channel(channel_cfg)
    g = torch.Generator().manual_seed(seed + 1)
    lo, hi = cfg.train_snr_db
    n = dataset.shape[0]
    for step in range(steps):
        idx = torch.randint(0, n, (cfg.batch_size,), generator=g)
        batch = dataset[idx]
        snr = lo + (hi - lo) * torch.rand((), generator=g).item()
        s = codec.encoder(batch)
        f = codec.coder.encode(s)
        f_hat = channel.transmit(f, stream=step, snr_db=snr)
        m = codec.coder.decode(f_hat)
        recon = codec.decoder(m)
        loss = decoder_loss(batch, recon)
        if not torch.isfinite(loss):
            raise RuntimeError(f"codec training diverged at step {step}: "
                               f"loss={loss.item()}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        if log is not None and (step % log_every == 0 or step == steps - 1):
            log(f"[train_codec] step {step} snr {snr:.1f}dB "
                f"loss {loss.item():.5f}")
    return codec.eval()
