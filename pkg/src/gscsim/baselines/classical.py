"""Separate source/channel coding baseline: JPEG + LDPC + 4-QAM over the
shared channel simulation.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import torch
from PIL import Image

from .. import channel as ch
from .ldpc import LdpcCode
from .qam import qam_modulate, qam_demodulate


class DecodeStatus(Enum):
    OK = "OK"
    CHANNEL_DECODE_FAILED = "CHANNEL_DECODE_FAILED"
    SOURCE_DECODE_FAILED = "SOURCE_DECODE_FAILED"


@dataclass
class DecodeOutcome:
    status: DecodeStatus
    image: torch.Tensor | None = None

    def __post_init__(self):
        if (self.image is not None) != (self.status == DecodeStatus.OK):
            raise ValueError("image must be present iff status is OK")


@dataclass
class ClassicalConfig:
    jpeg_quality: int = 75
    ldpc_blocklength: int = 1024
    bp_max_iters: int = 50
    modulation_order: int = 4   # fixed: 4-QAM
    ldpc_seed: int = 11

    def __post_init__(self):
        if not (1 <= self.jpeg_quality <= 100):
            raise ValueError("jpeg_quality must be in [1, 100]")
        if self.modulation_order != 4:
            raise ValueError("only 4-QAM is supported")


def _to_uint8_hwc(image: torch.Tensor) -> np.ndarray:
    arr = (image.clamp(0, 1).numpy() * 255.0).round().astype(np.uint8)
    return arr.transpose(1, 2, 0)


def _to_tensor(arr: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(arr.transpose(2, 0, 1).astype(np.float32) / 255.0)


def jpeg_encode(image: torch.Tensor, quality: int) -> bytes:
    """Encode one (3, H, W) image in [0,1] to a JPEG bitstream."""
    if not (1 <= quality <= 100):
        raise ValueError("quality must be in [1, 100]")
    buf = io.BytesIO()
    Image.fromarray(_to_uint8_hwc(image)).save(buf, format="JPEG",
                                               quality=quality)
    return buf.getvalue()


def jpeg_decode(stream: bytes) -> torch.Tensor:
    """Decode a JPEG bitstream; raises ValueError on corrupt streams."""
    try:
        with Image.open(io.BytesIO(stream)) as im:
            im.load()
            arr = np.asarray(im.convert("RGB"))
    except Exception as exc:
        raise ValueError(f"corrupt JPEG stream: {exc}") from exc
    return _to_tensor(arr)


def jpeg_roundtrip(image: torch.Tensor, quality: int) -> torch.Tensor:
    return jpeg_decode(jpeg_encode(image, quality))


def _bytes_to_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def _bits_to_bytes(bits: np.ndarray) -> bytes:
    return np.packbits(bits.astype(np.uint8)).tobytes()


_code_cache: dict[tuple, LdpcCode] = {}


def get_code(cfg: ClassicalConfig) -> LdpcCode:
    key = (cfg.ldpc_blocklength, cfg.ldpc_seed, cfg.bp_max_iters)
    if key not in _code_cache:
        _code_cache[key] = LdpcCode(cfg.ldpc_blocklength, seed=cfg.ldpc_seed,
                                    bp_max_iters=cfg.bp_max_iters)
    return _code_cache[key]


def classical_pipeline(image: torch.Tensor, channel_cfg: ch.ChannelConfig,
                       cfg: ClassicalConfig, stream: int = 0) -> DecodeOutcome:
    """JPEG -> LDPC -> 4-QAM -> channel -> demod -> LDPC -> JPEG for one
    (3, H, W) image."""
    code = get_code(cfg)
    payload = jpeg_encode(image, cfg.jpeg_quality)
    framed = len(payload).to_bytes(4, "big") + payload
    bits = _bytes_to_bits(framed)
    n_blocks = math.ceil(bits.size / code.k_info)
    padded = np.zeros(n_blocks * code.k_info, dtype=np.uint8)
    padded[:bits.size] = bits
    codewords = code.encode(padded.reshape(n_blocks, code.k_info))

    symbols = qam_modulate(codewords.reshape(-1))
    sigma2 = ch.snr_to_noise_power(channel_cfg.snr_db, channel_cfg.power)
    g = ch.substream_generator(channel_cfg.seed, stream)
    f = torch.from_numpy(
        np.stack([symbols.real, symbols.imag], axis=-1).reshape(-1)
    ).to(torch.float64) * math.sqrt(channel_cfg.power)
    if channel_cfg.kind == ch.AWGN:
        f_hat = ch.transmit_awgn(f, sigma2, g)
        eff_sigma2 = np.full(symbols.size, sigma2)
    else:
        h = ch.sample_csi(symbols.size, g, dtype=torch.float64)
        f_faded = ch.transmit_fading(f, h, sigma2, g)
        f_hat = ch.equalize(f_faded, h)
        mag2 = (h.real ** 2 + h.imag ** 2).numpy()
        eff_sigma2 = sigma2 / np.maximum(mag2, 1e-12)
    rp = f_hat.numpy().reshape(-1, 2) / math.sqrt(channel_cfg.power)
    rx_symbols = rp[:, 0] + 1j * rp[:, 1]

    llrs = qam_demodulate(rx_symbols, eff_sigma2 / channel_cfg.power)
    info, ok = code.decode(llrs.reshape(n_blocks, code.n))
    if not ok.all():
        return DecodeOutcome(DecodeStatus.CHANNEL_DECODE_FAILED)
    rx_bits = info.reshape(-1)[:bits.size]
    data = _bits_to_bytes(rx_bits)
    length = int.from_bytes(data[:4], "big")
    if length <= 0 or 4 + length > len(data):
        return DecodeOutcome(DecodeStatus.SOURCE_DECODE_FAILED)
    try:
        decoded = jpeg_decode(data[4:4 + length])
    except ValueError:
        return DecodeOutcome(DecodeStatus.SOURCE_DECODE_FAILED)
    if decoded.shape != image.shape:
        return DecodeOutcome(DecodeStatus.SOURCE_DECODE_FAILED)
    return DecodeOutcome(DecodeStatus.OK, decoded)


def outcome_to_image(outcome: DecodeOutcome,
                     shape: tuple) -> tuple[torch.Tensor, bool]:
    """Failure policy for sweep curves: failed decodes score against a
    mid-gray image so PSNR stays defined."""
    if outcome.status == DecodeStatus.OK:
        return outcome.image, True
    return torch.full(shape, 0.5), False
