"""Convolutional DeepJSCC autoencoder baseline.

Matches the proposed system's compression ratio and training SNR range so
comparisons are paired and fair. No decode-failure mode exists: quality
degrades continuously with SNR.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import torch
import torch.nn as nn

from .. import channel as ch


@dataclass
class DeepJsccConfig:
    compression_ratio: float = 1.0 / 6.0
    width: int = 32
    learning_rate: float = 1e-4
    batch_size: int = 32
    train_snr_db: tuple = (1.0, 13.0)

    def to_dict(self):
        d = asdict(self)
        d["train_snr_db"] = list(self.train_snr_db)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "train_snr_db" in d:
            d["train_snr_db"] = tuple(d["train_snr_db"])
        return cls(**d)


class DeepJsccModel:
    """Five convolution layers per side; the bottleneck feature map is
    flattened into the length-k channel signal."""

    def __init__(self, cfg: DeepJsccConfig, image_hw=(32, 32)):
        self.cfg = cfg
        self.image_hw = tuple(image_hw)
        h, w = image_hw
        n_dim = 3 * h * w
        self.k = int(round(cfg.compression_ratio * n_dim))
        # Bottleneck spatial grid is H/4 x W/4.
        grid = (h // 4) * (w // 4)
        if self.k % grid:
            raise ValueError("k must be divisible by the bottleneck grid")
        c_out = self.k // grid
        wd = cfg.width
        self.encoder = nn.Sequential(
            nn.Conv2d(3, wd, 5, stride=2, padding=2), nn.PReLU(),
            nn.Conv2d(wd, wd, 5, stride=2, padding=2), nn.PReLU(),
            nn.Conv2d(wd, wd, 5, padding=2), nn.PReLU(),
            nn.Conv2d(wd, wd, 5, padding=2), nn.PReLU(),
            nn.Conv2d(wd, c_out, 5, padding=2),
        )
        self.decoder = nn.Sequential(
            nn.Conv2d(c_out, wd, 5, padding=2), nn.PReLU(),
            nn.Conv2d(wd, wd, 5, padding=2), nn.PReLU(),
            nn.Conv2d(wd, wd, 5, padding=2), nn.PReLU(),
            nn.ConvTranspose2d(wd, wd, 4, stride=2, padding=1), nn.PReLU(),
            nn.ConvTranspose2d(wd, 3, 4, stride=2, padding=1),
        )
        self._c_out = c_out

    def eval(self):
        self.encoder.eval()
        self.decoder.eval()
        return self

    def parameters(self):
        yield from self.encoder.parameters()
        yield from self.decoder.parameters()

    def encode(self, images: torch.Tensor) -> torch.Tensor:
        z = self.encoder(images)
        return z.reshape(z.shape[0], -1)

    def decode(self, f_hat: torch.Tensor) -> torch.Tensor:
        h, w = self.image_hw
        z = f_hat.reshape(f_hat.shape[0], self._c_out, h // 4, w // 4)
        return self.decoder(z).clamp(0.0, 1.0)

    @torch.no_grad()
    def transmit(self, images: torch.Tensor, channel: ch.Channel,
                 stream: int = 0, snr_db: float | None = None) -> torch.Tensor:
        f = self.encode(images)
        f_hat = channel.transmit(f, stream=stream, snr_db=snr_db)
        return self.decode(f_hat)


def train_deepjscc(dataset: torch.Tensor, cfg: DeepJsccConfig,
                   channel_cfg: ch.ChannelConfig, steps: int = 500,
                   seed: int = 0, log_every: int = 50,
                   log=print) -> DeepJsccModel:
    torch.manual_seed(seed + 100)
    model = DeepJsccModel(cfg, image_hw=dataset.shape[-2:])
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    channel = ch.Channel(channel_cfg)
    g = torch.Generator().manual_seed(seed + 101)
    lo, hi = cfg.train_snr_db
    n = dataset.shape[0]
    mse = nn.MSELoss()
    for step in range(steps):
        idx = torch.randint(0, n, (cfg.batch_size,), generator=g)
        batch = dataset[idx]
        snr = lo + (hi - lo) * torch.rand((), generator=g).item()
        f = model.encode(batch)
        f_hat = channel.transmit(f, stream=step, snr_db=snr)
        recon = model.decode(f_hat)
        loss = mse(recon, batch)
        if not torch.isfinite(loss):
            raise RuntimeError(f"deepjscc training diverged at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        if log is not None and (step % log_every == 0 or step == steps - 1):
            log(f"[train_deepjscc] step {step} snr {snr:.1f}dB "
                f"loss {loss.item():.5f}")
    return model.eval()
