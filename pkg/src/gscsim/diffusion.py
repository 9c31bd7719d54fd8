"""Compact-vector denoising diffusion: linear variance schedule, closed-form
forward noising, and the deterministic T-step reverse chain used by the
semantic fine-tuning module.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch


@dataclass(frozen=True)
class DiffusionSchedule:
    beta: torch.Tensor       # (T,)
    alpha: torch.Tensor      # 1 - beta
    alpha_bar: torch.Tensor  # cumulative product of alpha

    @property
    def T(self) -> int:
        return self.beta.shape[0]


def make_schedule(T: int = 4, beta_lo: float = 0.10,
                  beta_hi: float = 0.99) -> DiffusionSchedule:
    """Linearly increasing beta table; T = 1 degenerates to [beta_hi]."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if not (0.0 < beta_lo < beta_hi < 1.0):
        raise ValueError("need 0 < beta_lo < beta_hi < 1")
    if T == 1:
        beta = torch.tensor([beta_hi], dtype=torch.float64)
    else:
        beta = torch.linspace(beta_lo, beta_hi, T, dtype=torch.float64)
    alpha = 1.0 - beta
    return DiffusionSchedule(beta=beta, alpha=alpha,
                             alpha_bar=torch.cumprod(alpha, dim=0))


def forward_diffuse(z0: torch.Tensor, schedule: DiffusionSchedule, t: int,
                    noise: torch.Tensor) -> torch.Tensor:
    """Closed-form noising: z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) noise."""
    if not (1 <= t <= schedule.T):
        raise ValueError(f"t={t} out of range [1, {schedule.T}]")
    abar = schedule.alpha_bar[t - 1].to(z0.dtype)
    return torch.sqrt(abar) * z0 + torch.sqrt(1.0 - abar) * noise


def forward_step(z_prev: torch.Tensor, schedule: DiffusionSchedule, t: int,
                 noise: torch.Tensor) -> torch.Tensor:
    """Single stepwise noising z_t = sqrt(1-beta_t) z_{t-1} + sqrt(beta_t) eps."""
    if not (1 <= t <= schedule.T):
        raise ValueError(f"t={t} out of range [1, {schedule.T}]")
    beta = schedule.beta[t - 1].to(z_prev.dtype)
    return torch.sqrt(1.0 - beta) * z_prev + torch.sqrt(beta) * noise


def reverse_step(z_t: torch.Tensor, t: int, eps_hat: torch.Tensor,
                 schedule: DiffusionSchedule) -> torch.Tensor:
    """Deterministic reverse update given the predicted noise eps_hat."""
    if not (1 <= t <= schedule.T):
        raise ValueError(f"t={t} out of range [1, {schedule.T}]")
    alpha = schedule.alpha[t - 1].to(z_t.dtype)
    abar = schedule.alpha_bar[t - 1].to(z_t.dtype)
    coef = (1.0 - alpha) / torch.sqrt(1.0 - abar)
    return (z_t - coef * eps_hat) / torch.sqrt(alpha)


def reverse_chain(z_T: torch.Tensor, cond: torch.Tensor, schedule,
                  denoiser) -> torch.Tensor:
    """Run all T reverse steps from z_T; exactly T denoiser evaluations.

    The denoiser is called as denoiser(z_t, t, cond) and must return a
    noise estimate of the same shape as z_t.
    """
    z = z_T
    for t in range(schedule.T, 0, -1):
        eps_hat = denoiser(z, t, cond)
        z = reverse_step(z, t, eps_hat, schedule)
    return z


def reverse_infer(cond: torch.Tensor, schedule, denoiser,
                  generator: torch.Generator | None = None) -> torch.Tensor:
    """Inference-time reverse chain starting from fresh Gaussian noise."""
    z_T = torch.randn(cond.shape, generator=generator, dtype=cond.dtype)
    return reverse_chain(z_T, cond, schedule, denoiser)


def pretrain_loss(original: torch.Tensor, restored: torch.Tensor) -> torch.Tensor:
    """L1 restoration loss, mean over all elements."""
    if original.shape != restored.shape:
        raise ValueError("shape mismatch")
    return (original - restored).abs().mean()


def diffusion_loss(z_hat: torch.Tensor, z0: torch.Tensor) -> torch.Tensor:
    """Mean absolute deviation between the estimated and true prior vectors."""
    if z_hat.shape != z0.shape:
        raise ValueError("dimension mismatch")
    return (z_hat - z0).abs().mean()
