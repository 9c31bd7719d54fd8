import math

import pytest
import torch

from gscsim import metrics as mt


class TestMse:
    def test_zero_iff_equal(self):
        x = torch.rand(2, 3, 8, 8)
        assert mt.mse(x, x).item() == 0

    def test_hand_value(self):
        a = torch.tensor([0.0, 0.5, 1.0])
        b = torch.tensor([0.5, 0.5, 0.5])
        assert mt.mse(a, b).item() == pytest.approx((0.25 + 0 + 0.25) / 3)

    def test_per_image(self):
        a = torch.zeros(2, 3, 4, 4)
        b = a.clone()
        b[1] += 0.5
        per = mt.mse(a, b, per_image=True)
        assert per.tolist() == pytest.approx([0.0, 0.25])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mt.mse(torch.zeros(2), torch.zeros(3))


class TestPsnr:
    def test_known_values(self):
        a = torch.zeros(1, 3, 8, 8)
        # mse = 0.01 -> 20 dB; mse = 1e-4 -> 40 dB
        assert mt.psnr(a, a + 0.1).item() == pytest.approx(20.0, abs=1e-4)
        assert mt.psnr(a, a + 0.01).item() == pytest.approx(40.0, abs=1e-3)

    def test_identical_images_capped(self):
        a = torch.rand(1, 3, 8, 8)
        assert mt.psnr(a, a).item() == 100.0

    def test_symmetry(self):
        a, b = torch.rand(1, 3, 8, 8), torch.rand(1, 3, 8, 8)
        assert mt.psnr(a, b).item() == pytest.approx(mt.psnr(b, a).item())

    def test_batch_is_mean_of_per_image(self):
        a = torch.rand(4, 3, 8, 8)
        b = torch.rand(4, 3, 8, 8)
        per = mt.psnr(a, b, per_image=True)
        assert mt.psnr(a, b).item() == pytest.approx(per.mean().item(),
                                                     rel=1e-6)

    def test_monotone_in_noise_amplitude(self):
        g = torch.Generator().manual_seed(0)
        a = torch.rand(1, 3, 16, 16, generator=g)
        noise = torch.randn(a.shape, generator=g)
        vals = [mt.psnr(a, (a + s * noise).clamp(0, 1)).item()
                for s in (0.01, 0.05, 0.2)]
        assert vals[0] > vals[1] > vals[2]


class TestPerceptualDistance:
    def test_zero_iff_equal(self):
        a = torch.rand(2, 3, 32, 32)
        assert mt.perceptual_distance(a, a).item() == 0

    def test_positive_for_different_images(self):
        g = torch.Generator().manual_seed(1)
        a = torch.rand(1, 3, 32, 32, generator=g)
        b = torch.rand(1, 3, 32, 32, generator=g)
        assert mt.perceptual_distance(a, b).item() > 0

    def test_symmetry(self):
        g = torch.Generator().manual_seed(2)
        a = torch.rand(1, 3, 32, 32, generator=g)
        b = torch.rand(1, 3, 32, 32, generator=g)
        assert mt.perceptual_distance(a, b).item() == pytest.approx(
            mt.perceptual_distance(b, a).item())

    def test_monotone_probe(self):
        # Growing the distortion amplitude should grow the distance for the
        # vast majority of random probes.
        g = torch.Generator().manual_seed(3)
        wins = 0
        for _ in range(100):
            a = torch.rand(1, 3, 32, 32, generator=g)
            noise = torch.randn(a.shape, generator=g)
            small = mt.perceptual_distance(a, (a + 0.05 * noise).clamp(0, 1))
            large = mt.perceptual_distance(a, (a + 0.3 * noise).clamp(0, 1))
            wins += int(large.item() > small.item())
        assert wins >= 90

    def test_backbone_determinism(self):
        a = torch.rand(1, 3, 32, 32)
        b = torch.rand(1, 3, 32, 32)
        d1 = mt.perceptual_distance(a, b, mt.RandomConvPyramid())
        d2 = mt.perceptual_distance(a, b, mt.RandomConvPyramid())
        assert d1.item() == d2.item()

    def test_per_image_mode(self):
        a = torch.rand(3, 3, 32, 32)
        b = torch.rand(3, 3, 32, 32)
        per = mt.perceptual_distance(a, b, per_image=True)
        assert per.shape == (3,)
        assert mt.perceptual_distance(a, b).item() == pytest.approx(
            per.mean().item(), rel=1e-6)


def test_metric_report_fields():
    a = torch.rand(4, 3, 32, 32)
    b = (a + 0.05).clamp(0, 1)
    rep = mt.MetricReport.compute(a, b)
    assert rep.n_images == 4
    assert 0 < rep.mse < 1
    assert rep.psnr_db == pytest.approx(10 * math.log10(1 / rep.mse), abs=0.5)
    assert rep.lpips >= 0
