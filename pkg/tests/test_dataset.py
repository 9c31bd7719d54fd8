import numpy as np
import pytest
import torch
from PIL import Image

from gscsim import dataset as ds


def write_cifar_bin(path, n, seed=0):
    rng = np.random.default_rng(seed)
    recs = np.zeros((n, ds.CIFAR_RECORD), dtype=np.uint8)
    recs[:, 0] = rng.integers(0, 10, n)
    recs[:, 1:] = rng.integers(0, 256, (n, 3072))
    path.write_bytes(recs.tobytes())
    return recs


class TestCifarBin:
    def test_record_count_and_shape(self, tmp_path):
        p = tmp_path / "batch.bin"
        write_cifar_bin(p, 100)
        data = ds.load_cifar_bin(p)
        assert data.shape == (100, 3, 32, 32)

    def test_pixel_scaling(self, tmp_path):
        p = tmp_path / "batch.bin"
        rec = np.zeros((1, ds.CIFAR_RECORD), dtype=np.uint8)
        rec[0, 1] = 255
        rec[0, 2] = 128
        p.write_bytes(rec.tobytes())
        data = ds.load_cifar_bin(p)
        assert data[0, 0, 0, 0].item() == pytest.approx(1.0)
        assert data[0, 0, 0, 1].item() == pytest.approx(128 / 255)
        assert data.min() >= 0 and data.max() <= 1

    def test_truncated_file_rejected(self, tmp_path):
        p = tmp_path / "bad.bin"
        p.write_bytes(b"\x00" * 100)
        with pytest.raises(ds.DatasetError):
            ds.load_cifar_bin(p)

    def test_label_byte_skipped(self, tmp_path):
        p = tmp_path / "batch.bin"
        rec = np.full((1, ds.CIFAR_RECORD), 7, dtype=np.uint8)
        rec[0, 0] = 255   # label byte must not leak into pixels
        p.write_bytes(rec.tobytes())
        data = ds.load_cifar_bin(p)
        assert data.max().item() == pytest.approx(7 / 255)


class TestImageDir:
    def test_sorted_deterministic_order(self, tmp_path):
        for name, val in (("b.png", 200), ("a.png", 50)):
            Image.fromarray(np.full((8, 8, 3), val, dtype=np.uint8)).save(
                tmp_path / name)
        data = ds.load_image_dir(tmp_path)
        assert data.shape == (2, 3, 8, 8)
        assert data[0].mean().item() == pytest.approx(50 / 255)

    def test_empty_dir_error(self, tmp_path):
        with pytest.raises(ds.DatasetError):
            ds.load_image_dir(tmp_path)

    def test_mixed_shapes_rejected(self, tmp_path):
        Image.fromarray(np.zeros((8, 8, 3), dtype=np.uint8)).save(
            tmp_path / "a.png")
        Image.fromarray(np.zeros((16, 16, 3), dtype=np.uint8)).save(
            tmp_path / "b.png")
        with pytest.raises(ds.DatasetError):
            ds.load_image_dir(tmp_path)


class TestIngest:
    def test_dir_of_bins(self, tmp_path):
        write_cifar_bin(tmp_path / "1.bin", 5, seed=1)
        write_cifar_bin(tmp_path / "2.bin", 7, seed=2)
        data = ds.ingest_dataset(tmp_path)
        assert data.shape == (12, 3, 32, 32)

    def test_single_bin_file(self, tmp_path):
        p = tmp_path / "batch.bin"
        write_cifar_bin(p, 3)
        assert ds.ingest_dataset(p).shape == (3, 3, 32, 32)

    def test_missing_path(self, tmp_path):
        with pytest.raises(ds.DatasetError):
            ds.ingest_dataset(tmp_path / "nope")

    def test_unsupported_file(self, tmp_path):
        p = tmp_path / "data.txt"
        p.write_text("hello")
        with pytest.raises(ds.DatasetError):
            ds.ingest_dataset(p)


class TestSynthetic:
    def test_shape_and_range(self):
        data = ds.make_synthetic(10, seed=0)
        assert data.shape == (10, 3, 32, 32)
        assert data.min() >= 0 and data.max() <= 1

    def test_deterministic(self):
        assert torch.equal(ds.make_synthetic(4, seed=3),
                           ds.make_synthetic(4, seed=3))
        assert not torch.equal(ds.make_synthetic(4, seed=3),
                               ds.make_synthetic(4, seed=4))

    def test_images_are_structured_not_white_noise(self):
        # Neighboring pixels should correlate strongly (low-frequency base).
        data = ds.make_synthetic(8, seed=1)
        dx = (data[..., 1:] - data[..., :-1]).pow(2).mean()
        assert dx.item() < data.var().item()

    def test_custom_hw(self):
        assert ds.make_synthetic(2, hw=(16, 48), seed=0).shape == (2, 3, 16, 48)
