"""Versioned checkpoint container shared by all trainable modules.

Layout: an .npz archive holding named float arrays plus a JSON header
(version, model kind, config, config hash, payload checksum). Loading
verifies integrity and rejects version or config mismatches.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np
import torch

FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


def config_hash(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True).encode()).hexdigest()


def _payload_checksum(arrays: dict) -> str:
    h = hashlib.sha256()
    for name in sorted(arrays):
        h.update(name.encode())
        h.update(np.ascontiguousarray(arrays[name]).tobytes())
    return h.hexdigest()


def save_checkpoint(path, kind: str, config: dict, arrays: dict) -> None:
    arrays = {k: np.asarray(v) for k, v in arrays.items()}
    header = {
        "version": FORMAT_VERSION,
        "kind": kind,
        "config": config,
        "config_hash": config_hash(config),
        "checksum": _payload_checksum(arrays),
    }
    meta = np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)
    np.savez(path, __header__=meta, **arrays)


def load_checkpoint(path, expect_kind: str | None = None,
                    expect_config: dict | None = None):
    try:
        with np.load(path) as z:
            if "__header__" not in z:
                raise CheckpointError(f"{path}: missing header")
            header = json.loads(z["__header__"].tobytes().decode())
            arrays = {k: z[k] for k in z.files if k != "__header__"}
    except CheckpointError:
        raise
    except Exception as exc:
        raise CheckpointError(f"{path}: corrupt or unreadable ({exc})") from exc
    if header.get("version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported version {header.get('version')}")
    if header.get("checksum") != _payload_checksum(arrays):
        raise CheckpointError(f"{path}: payload checksum mismatch")
    if header.get("config_hash") != config_hash(header.get("config", {})):
        raise CheckpointError(f"{path}: header config hash mismatch")
    if expect_kind is not None and header["kind"] != expect_kind:
        raise CheckpointError(
            f"{path}: kind {header['kind']!r}, expected {expect_kind!r}")
    if expect_config is not None and \
            config_hash(expect_config) != header["config_hash"]:
        raise CheckpointError(f"{path}: config hash mismatch")
    return header, arrays


def state_to_arrays(module: torch.nn.Module, prefix: str = "") -> dict:
    return {prefix + k: v.detach().cpu().numpy()
            for k, v in module.state_dict().items()}


def arrays_to_state(module: torch.nn.Module, arrays: dict,
                    prefix: str = "") -> None:
    state = {k[len(prefix):]: torch.from_numpy(np.array(v))
             for k, v in arrays.items() if k.startswith(prefix)}
    module.load_state_dict(state)


# Model-specific helpers --------------------------------------------------

def save_codec(path, codec) -> None:
    config = {"codec": codec.cfg.to_dict(), "image_hw": list(codec.image_hw)}
    arrays = {}
    arrays.update(state_to_arrays(codec.encoder, "encoder."))
    arrays.update(state_to_arrays(codec.decoder, "decoder."))
    arrays["coder.weight"] = codec.coder.weight.numpy()
    save_checkpoint(path, "jscc_codec", config, arrays)


def load_codec(path, expect_config: dict | None = None):
    from .codec import CodecConfig, JsccCodec, FixedChannelCoder
    header, arrays = load_checkpoint(path, "jscc_codec", expect_config)
    cfg = CodecConfig.from_dict(header["config"]["codec"])
    codec = JsccCodec(cfg, image_hw=tuple(header["config"]["image_hw"]))
    arrays_to_state(codec.encoder, arrays, "encoder.")
    arrays_to_state(codec.decoder, arrays, "decoder.")
    codec.coder = FixedChannelCoder(
        codec.coder.symbol_shape, codec.coder.k, seed=cfg.coder_seed,
        weight=torch.from_numpy(arrays["coder.weight"]))
    return codec.eval()


def save_sft(path, model) -> None:
    config = {"sft": model.cfg.to_dict()}
    arrays = {}
    arrays.update(state_to_arrays(model.n1, "n1."))
    arrays.update(state_to_arrays(model.n2, "n2."))
    arrays.update(state_to_arrays(model.denoiser, "denoiser."))
    save_checkpoint(path, "sft", config, arrays)


def load_sft(path, expect_config: dict | None = None):
    from .sft import SftConfig, SftModel
    header, arrays = load_checkpoint(path, "sft", expect_config)
    model = SftModel(SftConfig.from_dict(header["config"]["sft"]))
    arrays_to_state(model.n1, arrays, "n1.")
    arrays_to_state(model.n2, arrays, "n2.")
    arrays_to_state(model.denoiser, arrays, "denoiser.")
    return model.eval()


def save_deepjscc(path, model) -> None:
    config = {"deepjscc": model.cfg.to_dict(),
              "image_hw": list(model.image_hw)}
    arrays = {}
    arrays.update(state_to_arrays(model.encoder, "encoder."))
    arrays.update(state_to_arrays(model.decoder, "decoder."))
    save_checkpoint(path, "deepjscc", config, arrays)


def load_deepjscc(path, expect_config: dict | None = None):
    from .baselines.deepjscc import DeepJsccConfig, DeepJsccModel
    header, arrays = load_checkpoint(path, "deepjscc", expect_config)
    model = DeepJsccModel(DeepJsccConfig.from_dict(
        header["config"]["deepjscc"]),
        image_hw=tuple(header["config"]["image_hw"]))
    arrays_to_state(model.encoder, arrays, "encoder.")
    arrays_to_state(model.decoder, arrays, "decoder.")
    return model.eval()
