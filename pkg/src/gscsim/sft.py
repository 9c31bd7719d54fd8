"""Semantic fine-tuning: two-stage training (restoration pretraining, then
conditional diffusion over the compact prior vector) and inference-time
refinement of decoded images.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import torch
import torch.nn as nn

from . import channel as ch
from . import diffusion as df
from .restoration import PriorExtractor, RestorationNet


@dataclass
class SftConfig:
    cprime: int = 96
    heads: tuple = (1, 2, 4, 8)
    blocks: tuple = (3, 5, 6, 6)
    n2_dim: int = 32
    patch_size: int = 32
    batch_size: int = 16
    learning_rate: float = 2e-4
    beta_lo: float = 0.10
    beta_hi: float = 0.99
    timesteps: int = 4
    t_embed_dim: int = 32
    train_snr_db: tuple = (1.0, 13.0)
    joint_finetune: bool = True    # keep N1/N2 trainable in the diffusion stage

    def __post_init__(self):
        if len(self.heads) != 4 or len(self.blocks) != 4:
            raise ValueError("heads and blocks must list exactly four levels")

    @property
    def prior_dim(self) -> int:
        return 4 * self.cprime

    def to_dict(self):
        d = asdict(self)
        for key in ("heads", "blocks", "train_snr_db"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("heads", "blocks", "train_snr_db"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


class NoiseEstimator(nn.Module):
    """Denoiser over the compact prior vector, conditioned on the timestep
    (learned embedding) and the decoded-image prior D."""

    def __init__(self, prior_dim: int, timesteps: int, t_embed_dim: int = 32):
        super().__init__()
        hidden = 4 * prior_dim
        self.t_embed = nn.Embedding(timesteps, t_embed_dim)
        self.fc_in = nn.Linear(2 * prior_dim + t_embed_dim, hidden)
        self.fc_mid = nn.Linear(hidden, hidden)
        self.fc_out = nn.Linear(hidden, prior_dim)

    def forward(self, z_t: torch.Tensor, t: int,
                cond: torch.Tensor) -> torch.Tensor:
        te = self.t_embed(torch.full((z_t.shape[0],), t - 1,
                                     dtype=torch.long, device=z_t.device))
        h = torch.relu(self.fc_in(torch.cat([z_t, te, cond], dim=-1)))
        h = h + torch.relu(self.fc_mid(h))
        return self.fc_out(h)


class SftModel:
    """Bundle of the prior extractor (N1), restoration net (N2), denoiser
    and diffusion schedule."""

    def __init__(self, cfg: SftConfig):
        self.cfg = cfg
        self.n1 = PriorExtractor(cfg.cprime)
        self.n2 = RestorationNet(cfg.prior_dim, base_dim=cfg.n2_dim,
                                 heads=cfg.heads, blocks=cfg.blocks)
        self.denoiser = NoiseEstimator(cfg.prior_dim, cfg.timesteps,
                                       cfg.t_embed_dim)
        self.schedule = df.make_schedule(cfg.timesteps, cfg.beta_lo,
                                         cfg.beta_hi)

    def eval(self):
        self.n1.eval()
        self.n2.eval()
        self.denoiser.eval()
        return self

    def pretrain_parameters(self):
        yield from self.n1.parameters()
        yield from self.n2.parameters()

    def diffusion_parameters(self):
        yield from self.denoiser.parameters()
        if self.cfg.joint_finetune:
            yield from self.pretrain_parameters()


@torch.no_grad()
def refine(s_hat: torch.Tensor, model: SftModel,
           generator: torch.Generator | None = None) -> torch.Tensor:
    """Inference-time refinement: condition on the decoded image only,
    run the full reverse chain, restore."""
    cond = model.n1(s_hat)
    z_hat = df.reverse_infer(cond, model.schedule, model.denoiser, generator)
    return model.n2(s_hat, z_hat)


def _sample_batch(dataset, batch_size, g):
    idx = torch.randint(0, dataset.shape[0], (batch_size,), generator=g)
    return dataset[idx]


def pretrain_stage(dataset: torch.Tensor, codec, channel_cfg: ch.ChannelConfig,
                   cfg: SftConfig, steps: int = 400, seed: int = 0,
                   model: SftModel | None = None, log_every: int = 50,
                   log=print) -> SftModel:
    """Jointly train N1 and N2 under the L1 restoration loss on decoded
    images produced by the trained codec at randomly drawn SNRs."""
    torch.manual_seed(seed)
    model = model or SftModel(cfg)
    opt = torch.optim.Adam(model.pretrain_parameters(), lr=cfg.learning_rate)
    channel = ch.Channel(channel_cfg)
    g = torch.Generator().manual_seed(seed + 1)
    lo, hi = cfg.train_snr_db
    for step in range(steps):
        clean = _sample_batch(dataset, cfg.batch_size, g)
        snr = lo + (hi - lo) * torch.rand((), generator=g).item()
        s_hat = codec.transmit(clean, channel, stream=step, snr_db=snr)
        z = model.n1(s_hat, clean)
        restored = model.n2(s_hat, z)
        loss = df.pretrain_loss(clean, restored)
        if not torch.isfinite(loss):
            raise RuntimeError(f"pretraining diverged at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        if log is not None and (step % log_every == 0 or step == steps - 1):
            log(f"[pretrain_stage] step {step} snr {snr:.1f}dB "
                f"loss {loss.item():.5f}")
    return model


def train_diffusion_stage(dataset: torch.Tensor, codec,
                          channel_cfg: ch.ChannelConfig, model: SftModel,
                          steps: int = 400, seed: int = 0,
                          log_every: int = 50, log=print) -> SftModel:
    """Diffusion training: noise the paired prior to Z_T, run the full
    reverse chain conditioned on the decoded-image prior, and optimize the
    joint loss L_pre + L_diff."""
    torch.manual_seed(seed + 17)
    cfg = model.cfg
    opt = torch.optim.Adam(model.diffusion_parameters(), lr=cfg.learning_rate)
    channel = ch.Channel(channel_cfg)
    g = torch.Generator().manual_seed(seed + 2)
    lo, hi = cfg.train_snr_db
    for step in range(steps):
        clean = _sample_batch(dataset, cfg.batch_size, g)
        snr = lo + (hi - lo) * torch.rand((), generator=g).item()
        s_hat = codec.transmit(clean, channel, stream=10_000 + step,
                               snr_db=snr)
        z0 = model.n1(s_hat, clean)
        noise = torch.randn(z0.shape, generator=g, dtype=z0.dtype)
        z_T = df.forward_diffuse(z0, model.schedule, model.schedule.T, noise)
        cond = model.n1(s_hat)
        z_hat = df.reverse_chain(z_T, cond, model.schedule, model.denoiser)
        restored = model.n2(s_hat, z_hat)
        loss = df.pretrain_loss(clean, restored) + df.diffusion_loss(z_hat, z0)
        if not torch.isfinite(loss):
            raise RuntimeError(f"diffusion training diverged at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        if log is not None and (step % log_every == 0 or step == steps - 1):
            log(f"[train_diffusion_stage] step {step} snr {snr:.1f}dB "
                f"loss {loss.item():.5f}")
    return model
