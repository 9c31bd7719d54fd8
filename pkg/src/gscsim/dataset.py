"""Dataset ingestion: CIFAR-10 binary batches or a directory of RGB
images, plus a deterministic synthetic image generator for desk-scale
runs without external data.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image

CIFAR_RECORD = 3073   # 1 label byte + 3072 pixel bytes


class DatasetError(Exception):
    pass


def load_cifar_bin(path: Path) -> torch.Tensor:
    data = path.read_bytes()
    if len(data) == 0 or len(data) % CIFAR_RECORD:
        raise DatasetError(f"{path}: not a CIFAR-10 binary batch "
                           f"({len(data)} bytes)")
    arr = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    pixels = arr[:, 1:].reshape(-1, 3, 32, 32)
    return torch.from_numpy(pixels.astype(np.float32) / 255.0)


def load_image_dir(path: Path) -> torch.Tensor:
    files = sorted(p for p in path.iterdir()
                   if p.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp"))
    if not files:
        raise DatasetError(f"{path}: no images found")
    images = []
    for p in files:
        try:
            with Image.open(p) as im:
                arr = np.asarray(im.convert("RGB"))
        except Exception as exc:
            raise DatasetError(f"{p}: unreadable image ({exc})") from exc
        images.append(arr.transpose(2, 0, 1))
    shapes = {im.shape for im in images}
    if len(shapes) != 1:
        raise DatasetError(f"{path}: mixed image shapes {shapes}")
    stack = np.stack(images).astype(np.float32) / 255.0
    return torch.from_numpy(stack)


def ingest_dataset(path) -> torch.Tensor:
    """Load images as an (N, 3, H, W) tensor in [0, 1], deterministic order."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"{path}: no such file or directory")
    if path.is_dir():
        bins = sorted(path.glob("*.bin"))
        if bins:
            return torch.cat([load_cifar_bin(p) for p in bins])
        return load_image_dir(path)
    if path.suffix == ".bin":
        return load_cifar_bin(path)
    raise DatasetError(f"{path}: unsupported dataset layout")


def make_synthetic(n: int, hw=(32, 32), seed: int = 0) -> torch.Tensor:
    """Smooth structured random images: low-frequency fields plus soft
    geometric shapes, values in [0, 1]."""
    h, w = hw
    g = torch.Generator().manual_seed(seed)
    coarse = torch.randn(n, 3, max(h // 8, 2), max(w // 8, 2), generator=g)
    base = torch.nn.functional.interpolate(coarse, size=(h, w),
                                           mode="bilinear",
                                           align_corners=False)
    yy, xx = torch.meshgrid(torch.linspace(0, 1, h), torch.linspace(0, 1, w),
                            indexing="ij")
    cx = torch.rand(n, 1, 1, 1, generator=g)
    cy = torch.rand(n, 1, 1, 1, generator=g)
    r = 0.08 + 0.22 * torch.rand(n, 1, 1, 1, generator=g)
    amp = torch.randn(n, 3, 1, 1, generator=g)
    blob = torch.exp(-(((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * r ** 2)))
    img = base + amp * blob
    lo = img.amin(dim=(1, 2, 3), keepdim=True)
    hi = img.amax(dim=(1, 2, 3), keepdim=True)
    return (img - lo) / (hi - lo + 1e-8)
