"""Canonical end-to-end evaluation pipeline shared by the experiment
harness and the multi-user orchestrator.

Work is split into fixed-size microbatches with substream-derived
randomness per microbatch, so results are a pure function of
(images, models, channel config, stream base) regardless of who runs the
computation or how it is scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from . import channel as ch
from . import sft as sft_mod

MICROBATCH = 16


@dataclass
class ModelBundle:
    codec: object                      # JsccCodec
    sft: object | None = None          # SftModel, absent for the ablation
    deepjscc: object | None = None
    version: str = "dev"


def _microbatches(images: torch.Tensor):
    for i in range(0, images.shape[0], MICROBATCH):
        yield i // MICROBATCH, images[i:i + MICROBATCH]


@torch.no_grad()
def decode_images(images: torch.Tensor, codec, channel_cfg: ch.ChannelConfig,
                  stream_base: int = 0) -> torch.Tensor:
    """Codec pipeline over microbatches; one channel substream each."""
    channel = ch.Channel(channel_cfg)
    out = []
    for bi, batch in _microbatches(images):
        out.append(codec.transmit(batch, channel, stream=stream_base + bi))
    return torch.cat(out)


@torch.no_grad()
def refine_images(s_hat: torch.Tensor, sft_model,
                  channel_cfg: ch.ChannelConfig,
                  stream_base: int = 0) -> torch.Tensor:
    """Diffusion refinement over microbatches; the reverse-chain start
    noise is substream-derived per microbatch."""
    out = []
    for bi, batch in _microbatches(s_hat):
        g = ch.substream_generator(channel_cfg.seed, stream_base + bi,
                                   0xD1FF)
        out.append(sft_mod.refine(batch, sft_model, generator=g))
    return torch.cat(out)


@torch.no_grad()
def run_gsc(images: torch.Tensor, bundle: ModelBundle,
            channel_cfg: ch.ChannelConfig, stream_base: int = 0,
            refine: bool = True):
    """Returns (decoded, refined); refined is None when refine is off or
    no fine-tuning model is present (the non-generative ablation)."""
    s_hat = decode_images(images, bundle.codec, channel_cfg, stream_base)
    if refine and bundle.sft is not None:
        return s_hat, refine_images(s_hat, bundle.sft, channel_cfg,
                                    stream_base)
    return s_hat, None


@torch.no_grad()
def run_deepjscc(images: torch.Tensor, bundle: ModelBundle,
                 channel_cfg: ch.ChannelConfig,
                 stream_base: int = 0) -> torch.Tensor:
    channel = ch.Channel(channel_cfg)
    out = []
    for bi, batch in _microbatches(images):
        out.append(bundle.deepjscc.transmit(batch, channel,
                                            stream=stream_base + bi))
    return torch.cat(out)
