import pytest
import torch

from gscsim import channel as ch
from gscsim import dataset as ds
from gscsim import metrics as mt
from gscsim.baselines.deepjscc import (DeepJsccConfig, DeepJsccModel,
                                       train_deepjscc)


class TestModel:
    def test_signal_length_matches_compression_ratio(self):
        model = DeepJsccModel(DeepJsccConfig())
        assert model.k == 512   # 3*32*32 / 6
        f = model.encode(torch.rand(2, 3, 32, 32))
        assert f.shape == (2, 512)

    def test_decode_shape_and_range(self):
        model = DeepJsccModel(DeepJsccConfig()).eval()
        out = model.decode(torch.randn(2, 512) * 10)
        assert out.shape == (2, 3, 32, 32)
        assert out.min() >= 0 and out.max() <= 1

    def test_indivisible_bottleneck_rejected(self):
        with pytest.raises(ValueError):
            DeepJsccModel(DeepJsccConfig(compression_ratio=1 / 7))

    def test_transmit_reproducible(self):
        torch.manual_seed(0)
        model = DeepJsccModel(DeepJsccConfig()).eval()
        img = torch.rand(2, 3, 32, 32)
        chan = ch.Channel(ch.ChannelConfig(snr_db=6.0, seed=2))
        assert torch.equal(model.transmit(img, chan, stream=1),
                           model.transmit(img, chan, stream=1))

    def test_config_dict_roundtrip(self):
        cfg = DeepJsccConfig(width=16)
        assert DeepJsccConfig.from_dict(cfg.to_dict()) == cfg


def test_training_improves_reconstruction():
    data = ds.make_synthetic(128, seed=5)
    chan_cfg = ch.ChannelConfig(snr_db=10.0, seed=1)
    torch.manual_seed(0)
    fresh = DeepJsccModel(DeepJsccConfig(), image_hw=(32, 32)).eval()
    trained = train_deepjscc(data, DeepJsccConfig(), chan_cfg, steps=150,
                             seed=0, log=None)
    chan = ch.Channel(chan_cfg)
    before = mt.psnr(data[:32], fresh.transmit(data[:32], chan, stream=0))
    after = mt.psnr(data[:32], trained.transmit(data[:32], chan, stream=0))
    assert after.item() > before.item() + 3.0
