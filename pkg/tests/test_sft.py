import pytest
import torch

from gscsim import channel as ch
from gscsim import dataset as ds
from gscsim import sft
from gscsim.codec import CodecConfig, JsccCodec


def tiny_cfg(**kw):
    kw.setdefault("cprime", 8)
    kw.setdefault("n2_dim", 8)
    kw.setdefault("blocks", (1, 1, 1, 1))
    kw.setdefault("batch_size", 4)
    return sft.SftConfig(**kw)


class TestConfig:
    def test_defaults_match_reference_profile(self):
        cfg = sft.SftConfig()
        assert cfg.cprime == 96
        assert cfg.blocks == (3, 5, 6, 6)
        assert cfg.heads == (1, 2, 4, 8)
        assert cfg.timesteps == 4
        assert (cfg.beta_lo, cfg.beta_hi) == (0.10, 0.99)
        assert cfg.prior_dim == 384

    def test_dict_roundtrip(self):
        cfg = tiny_cfg()
        assert sft.SftConfig.from_dict(cfg.to_dict()) == cfg

    def test_level_validation(self):
        with pytest.raises(ValueError):
            sft.SftConfig(blocks=(1, 1, 1))


class TestNoiseEstimator:
    def test_shapes(self):
        den = sft.NoiseEstimator(prior_dim=32, timesteps=4)
        z = torch.randn(5, 32)
        cond = torch.randn(5, 32)
        for t in (1, 4):
            assert den(z, t, cond).shape == (5, 32)

    def test_timestep_conditioning(self):
        torch.manual_seed(0)
        den = sft.NoiseEstimator(prior_dim=16, timesteps=4).eval()
        z = torch.randn(1, 16)
        cond = torch.randn(1, 16)
        with torch.no_grad():
            assert not torch.allclose(den(z, 1, cond), den(z, 4, cond))

    def test_condition_sensitivity(self):
        torch.manual_seed(1)
        den = sft.NoiseEstimator(prior_dim=16, timesteps=4).eval()
        z = torch.randn(1, 16)
        with torch.no_grad():
            a = den(z, 2, torch.zeros(1, 16))
            b = den(z, 2, torch.ones(1, 16))
        assert not torch.allclose(a, b)


class TestModel:
    def test_parameter_groups(self):
        model = sft.SftModel(tiny_cfg())
        pre = list(model.pretrain_parameters())
        dif = list(model.diffusion_parameters())
        den = list(model.denoiser.parameters())
        # joint fine-tuning keeps N1/N2 in the diffusion group
        assert len(dif) == len(den) + len(pre)
        model2 = sft.SftModel(tiny_cfg(joint_finetune=False))
        assert len(list(model2.diffusion_parameters())) == \
            len(list(model2.denoiser.parameters()))

    def test_refine_shapes_and_range(self):
        torch.manual_seed(2)
        model = sft.SftModel(tiny_cfg()).eval()
        img = torch.rand(3, 3, 32, 32)
        out = sft.refine(img, model, torch.Generator().manual_seed(0))
        assert out.shape == img.shape
        assert out.min() >= 0 and out.max() <= 1

    def test_refine_generator_reproducibility(self):
        torch.manual_seed(3)
        model = sft.SftModel(tiny_cfg()).eval()
        img = torch.rand(1, 3, 32, 32)
        a = sft.refine(img, model, torch.Generator().manual_seed(5))
        b = sft.refine(img, model, torch.Generator().manual_seed(5))
        assert torch.equal(a, b)


@pytest.fixture(scope="module")
def codec():
    torch.manual_seed(4)
    return JsccCodec(CodecConfig()).eval()


class TestTrainingStages:
    def test_pretrain_reduces_loss(self, codec):
        data = ds.make_synthetic(64, seed=8)
        losses = []
        model = sft.pretrain_stage(
            data, codec, ch.ChannelConfig(seed=1), tiny_cfg(), steps=30,
            seed=0, log_every=1, log=lambda m: losses.append(m))
        vals = [float(m.rsplit(" ", 1)[-1]) for m in losses]
        assert min(vals[-5:]) < vals[0]
        assert isinstance(model, sft.SftModel)

    def test_diffusion_stage_runs_and_logs(self, codec):
        data = ds.make_synthetic(32, seed=9)
        model = sft.pretrain_stage(data, codec, ch.ChannelConfig(seed=1),
                                   tiny_cfg(), steps=2, seed=0, log=None)
        msgs = []
        model = sft.train_diffusion_stage(
            data, codec, ch.ChannelConfig(seed=1), model, steps=4, seed=0,
            log_every=1, log=msgs.append)
        assert len(msgs) == 4
        # Finite losses throughout (divergence raises instead).
        for m in msgs:
            assert float(m.rsplit(" ", 1)[-1]) == pytest.approx(
                float(m.rsplit(" ", 1)[-1]))
