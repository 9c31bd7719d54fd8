import math

import pytest
import torch

from gscsim import diffusion as df


def oracle_denoiser(z0):
    """Noise estimate consistent with the closed-form forward process."""
    def denoiser(z_t, t, cond, schedule=df.make_schedule()):
        abar = schedule.alpha_bar[t - 1].to(z_t.dtype)
        return (z_t - torch.sqrt(abar) * z0) / torch.sqrt(1.0 - abar)
    return denoiser


class TestSchedule:
    def test_beta_table(self):
        sched = df.make_schedule()
        expect = [0.10, 0.10 + 0.89 / 3, 0.10 + 2 * 0.89 / 3, 0.99]
        assert sched.beta.tolist() == pytest.approx(expect, abs=1e-12)

    def test_alpha_bar_final_value(self):
        sched = df.make_schedule()
        # independent product oracle over the beta table
        prod = 1.0
        for b in sched.beta.tolist():
            prod *= 1.0 - b
        assert sched.alpha_bar[-1].item() == pytest.approx(prod, abs=1e-15)
        assert abs(sched.alpha_bar[-1].item() - 1.665e-3) < 1e-6

    def test_monotone_tables(self):
        sched = df.make_schedule(T=7)
        assert (sched.beta.diff() > 0).all()
        assert (sched.alpha_bar.diff() < 0).all()

    def test_degenerate_single_step(self):
        sched = df.make_schedule(T=1)
        assert sched.beta.tolist() == [0.99]
        assert sched.alpha_bar.tolist() == pytest.approx([0.01])

    def test_validation(self):
        with pytest.raises(ValueError):
            df.make_schedule(T=0)
        with pytest.raises(ValueError):
            df.make_schedule(beta_lo=0.5, beta_hi=0.4)
        with pytest.raises(ValueError):
            df.make_schedule(beta_hi=1.0)


class TestForward:
    def test_closed_form_moments(self):
        # Monte Carlo: var(z_t) = abar * var(z0) + (1 - abar) for unit noise.
        sched = df.make_schedule()
        g = torch.Generator().manual_seed(0)
        n = 100_000
        z0 = torch.full((n,), 2.0)
        for t in (1, 4):
            noise = torch.randn(n, generator=g)
            z_t = df.forward_diffuse(z0, sched, t, noise)
            abar = sched.alpha_bar[t - 1].item()
            assert abs(z_t.mean().item() - 2.0 * math.sqrt(abar)) < 0.01
            assert abs(z_t.var().item() - (1 - abar)) / (1 - abar) < 0.01

    def test_stepwise_composition_matches_closed_form_in_distribution(self):
        # Composing T stepwise updates with independent noise matches the
        # closed-form marginal in mean and variance.
        sched = df.make_schedule()
        g = torch.Generator().manual_seed(1)
        n = 100_000
        z = torch.full((n,), 1.5)
        for t in range(1, 5):
            z = df.forward_step(z, sched, t, torch.randn(n, generator=g))
        abar = sched.alpha_bar[-1].item()
        assert abs(z.mean().item() - 1.5 * math.sqrt(abar)) < 0.01
        assert abs(z.var().item() - (1 - abar)) < 0.01

    def test_zero_noise_is_pure_scaling(self):
        sched = df.make_schedule()
        z0 = torch.rand(8)
        z4 = df.forward_diffuse(z0, sched, 4, torch.zeros(8))
        assert torch.allclose(z4, z0 * math.sqrt(sched.alpha_bar[-1].item()),
                              atol=1e-7)

    def test_range_check(self):
        sched = df.make_schedule()
        with pytest.raises(ValueError):
            df.forward_diffuse(torch.zeros(2), sched, 0, torch.zeros(2))
        with pytest.raises(ValueError):
            df.forward_step(torch.zeros(2), sched, 5, torch.zeros(2))


class TestReverse:
    def test_final_step_exact_recovery(self):
        # With a consistent noise estimate the t=1 update recovers z0 exactly
        # because the cumulative product collapses to alpha_1 there.
        sched = df.make_schedule()
        g = torch.Generator().manual_seed(2)
        z0 = torch.randn(16, dtype=torch.float64, generator=g)
        noise = torch.randn(16, dtype=torch.float64, generator=g)
        z1 = df.forward_diffuse(z0, sched, 1, noise)
        eps = oracle_denoiser(z0)(z1, 1, None)
        back = df.reverse_step(z1, 1, eps, sched)
        assert (back - z0).abs().max().item() < 1e-9

    def test_full_chain_with_oracle_denoiser(self):
        sched = df.make_schedule()
        g = torch.Generator().manual_seed(3)
        z0 = torch.randn(4, 64, dtype=torch.float64, generator=g)
        noise = torch.randn(4, 64, dtype=torch.float64, generator=g)
        z4 = df.forward_diffuse(z0, sched, 4, noise)
        out = df.reverse_chain(z4, None, sched, oracle_denoiser(z0))
        assert (out - z0).abs().max().item() < 1e-6

    def test_zero_denoiser_closed_form(self):
        # eps_hat == 0 collapses the chain to z_T / sqrt(abar_T).
        sched = df.make_schedule()
        z4 = torch.rand(8, dtype=torch.float64)
        out = df.reverse_chain(z4, None, sched, lambda z, t, c: torch.zeros_like(z))
        expect = z4 / torch.sqrt(sched.alpha_bar[-1])
        assert torch.allclose(out, expect, atol=1e-12)

    def test_chain_calls_denoiser_exactly_T_times(self):
        sched = df.make_schedule(T=4)
        calls = []

        def spy(z, t, cond):
            calls.append(t)
            return torch.zeros_like(z)

        df.reverse_chain(torch.zeros(3), None, sched, spy)
        assert calls == [4, 3, 2, 1]

    def test_infer_draws_fresh_noise_reproducibly(self):
        sched = df.make_schedule()
        cond = torch.zeros(5, dtype=torch.float64)
        den = lambda z, t, c: torch.zeros_like(z)
        a = df.reverse_infer(cond, sched, den,
                             torch.Generator().manual_seed(7))
        b = df.reverse_infer(cond, sched, den,
                             torch.Generator().manual_seed(7))
        c = df.reverse_infer(cond, sched, den,
                             torch.Generator().manual_seed(8))
        assert torch.equal(a, b)
        assert not torch.equal(a, c)


class TestLosses:
    def test_pretrain_loss_zero_iff_equal(self):
        x = torch.rand(3, 4)
        assert df.pretrain_loss(x, x).item() == 0
        assert df.pretrain_loss(x, x + 0.1).item() > 0

    def test_pretrain_loss_oracle(self):
        a = torch.tensor([0.0, 1.0, 2.0])
        b = torch.tensor([1.0, 1.0, 0.0])
        assert df.pretrain_loss(a, b).item() == pytest.approx(1.0)

    def test_diffusion_loss_scale(self):
        z = torch.zeros(10)
        assert df.diffusion_loss(z + 0.5, z).item() == pytest.approx(0.5)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            df.pretrain_loss(torch.zeros(2), torch.zeros(3))
        with pytest.raises(ValueError):
            df.diffusion_loss(torch.zeros(2), torch.zeros(3))
