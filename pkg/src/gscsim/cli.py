"""Command-line entry points: training, sweeps, baselines, multi-user runs
and runtime measurement.
"""

from __future__ import annotations

import argparse
import json
import os
from pathlib import Path

import torch

from . import channel as ch
from . import checkpoint as ckpt
from . import harness
from . import orchestrator as orch
from . import pipeline as pl
from .baselines.deepjscc import DeepJsccConfig, train_deepjscc
from .codec import CodecConfig, train_codec
from .sft import SftConfig, pretrain_stage, train_diffusion_stage


def _out_dir(args) -> Path:
    root = os.environ.get("GSCSIM_OUT_ROOT", ".")
    out = Path(root) / args.out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(args) -> dict:
    if args.config:
        return harness.parse_config_file(args.config)
    return {}


def _sub(cfg: dict, prefix: str) -> dict:
    plen = len(prefix) + 1
    return {k[plen:]: v for k, v in cfg.items() if k.startswith(prefix + ".")}


def _channel_config(cfg: dict, seed: int) -> ch.ChannelConfig:
    sub = _sub(cfg, "channel")
    return ch.ChannelConfig(kind=sub.get("kind", ch.AWGN),
                            snr_db=float(sub.get("snr_db", 10.0)),
                            power=float(sub.get("power", 1.0)),
                            seed=int(sub.get("seed", seed)))


def _training_data(cfg: dict, seed: int) -> torch.Tensor:
    from . import dataset as ds
    n = int(cfg.get("train.images", 2000))
    if cfg.get("dataset"):
        return ds.ingest_dataset(cfg["dataset"])[:n]
    return ds.make_synthetic(n, seed=seed)


def cmd_train_codec(args):
    cfg = _load_config(args)
    codec_cfg = CodecConfig(**_sub(cfg, "codec"))
    data = _training_data(cfg, args.seed)
    codec = train_codec(data, codec_cfg, _channel_config(cfg, args.seed),
                        steps=int(cfg.get("train.steps", 1000)),
                        seed=args.seed)
    path = _out_dir(args) / "codec.npz"
    ckpt.save_codec(path, codec)
    print(f"saved {path}")


def cmd_train_sft(args):
    cfg = _load_config(args)
    codec = ckpt.load_codec(Path(args.codec))
    sft_cfg = SftConfig(**_sub(cfg, "sft"))
    data = _training_data(cfg, args.seed)
    channel_cfg = _channel_config(cfg, args.seed)
    model = pretrain_stage(data, codec, channel_cfg, sft_cfg,
                           steps=int(cfg.get("train.pretrain_steps", 400)),
                           seed=args.seed)
    model = train_diffusion_stage(
        data, codec, channel_cfg, model,
        steps=int(cfg.get("train.diffusion_steps", 400)), seed=args.seed)
    path = _out_dir(args) / "sft.npz"
    ckpt.save_sft(path, model)
    print(f"saved {path}")


def _experiment_config(cfg: dict, args) -> harness.ExperimentConfig:
    kw = {}
    for key in ("systems", "snr_grid", "channels", "seeds", "n_eval",
                "dataset", "jpeg_quality"):
        if key in cfg:
            kw[key] = cfg[key]
    for key, attr in (("mu.users", "mu_users"), ("mu.workers", "mu_workers"),
                      ("mu.cache_capacity", "cache_capacity")):
        if key in cfg:
            kw[attr] = int(cfg[key])
    for key in ("seeds", "snr_grid", "systems", "channels"):
        if key in kw and not isinstance(kw[key], tuple):
            kw[key] = (kw[key],)
    kw["out_dir"] = str(_out_dir(args))
    if "seeds" not in kw:
        kw["seeds"] = (args.seed,)
    return harness.ExperimentConfig(**kw)


def _load_bundle(args, cfg: dict) -> pl.ModelBundle:
    def maybe(loader, path):
        if path and Path(path).exists():
            return loader(Path(path))
        return None

    codec = maybe(ckpt.load_codec, getattr(args, "codec", None))
    sft = maybe(ckpt.load_sft, getattr(args, "sft", None))
    deepjscc = maybe(ckpt.load_deepjscc, getattr(args, "deepjscc", None))
    version = "-".join(filter(None, [
        getattr(args, "codec", None), getattr(args, "sft", None)])) or "none"
    return pl.ModelBundle(codec=codec, sft=sft, deepjscc=deepjscc,
                          version=version)


def cmd_sweep(args):
    cfg = _load_config(args)
    exp = _experiment_config(cfg, args)
    bundle = _load_bundle(args, cfg)
    rows = harness.sweep(exp, bundle)
    print(f"wrote {len(rows)} rows to {Path(exp.out_dir) / 'results.csv'}")


def cmd_baseline(args):
    cfg = _load_config(args)
    if args.kind == "deepjscc":
        dj_cfg = DeepJsccConfig(**_sub(cfg, "deepjscc"))
        data = _training_data(cfg, args.seed)
        model = train_deepjscc(data, dj_cfg, _channel_config(cfg, args.seed),
                               steps=int(cfg.get("train.steps", 1000)),
                               seed=args.seed)
        path = _out_dir(args) / "deepjscc.npz"
        ckpt.save_deepjscc(path, model)
        print(f"saved {path}")
    else:
        exp = _experiment_config(cfg, args)
        exp = harness.ExperimentConfig(**{
            **{k: getattr(exp, k) for k in exp.__dataclass_fields__},
            "systems": ("CLASSICAL",)})
        rows = harness.sweep(exp, pl.ModelBundle(codec=None))
        print(f"wrote {len(rows)} rows to {Path(exp.out_dir)/'results.csv'}")


def cmd_mu_run(args):
    cfg = _load_config(args)
    exp = _experiment_config(cfg, args)
    bundle = _load_bundle(args, cfg)
    images = harness.load_eval_set(exp)
    channel_cfg = _channel_config(cfg, args.seed)
    streams = orch.segment_users(images, exp.mu_users, seed=args.seed)
    cache = orch.LruCache(exp.cache_capacity)
    jobs = [orch.TransmissionJob(user_id=u, images=s, channel=channel_cfg,
                                 seed=args.seed)
            for u, s in enumerate(streams)]
    report = orch.run_concurrent(jobs, bundle, worker_budget=exp.mu_workers,
                                 cache=cache)
    out = _out_dir(args) / "mu_timing.json"
    out.write_text(json.dumps(report, indent=2))
    print(json.dumps(report, indent=2))


def cmd_timeit(args):
    cfg = _load_config(args)
    exp = _experiment_config(cfg, args)
    bundle = _load_bundle(args, cfg)
    images = harness.load_eval_set(exp)
    channel_cfg = _channel_config(cfg, args.seed)

    def run_single():
        pl.run_gsc(images, bundle, channel_cfg)

    def run_multi():
        streams = orch.segment_users(images, exp.mu_users, seed=args.seed)
        jobs = [orch.TransmissionJob(user_id=u, images=s, channel=channel_cfg,
                                     seed=args.seed)
                for u, s in enumerate(streams)]
        orch.run_concurrent(jobs, bundle, worker_budget=exp.mu_workers)

    single = harness.timeit(run_single, reps=args.reps)
    multi = harness.timeit(run_multi, reps=args.reps)
    report = {
        "workload_images": images.shape[0],
        "gsc": single, "mu_gsc": multi,
        "gsc_per_image_s": single["median_s"] / images.shape[0],
        "mu_gsc_per_image_s": multi["median_s"] / images.shape[0],
        "speedup": single["median_s"] / multi["median_s"],
    }
    out = _out_dir(args) / "timeit.json"
    out.write_text(json.dumps(report, indent=2))
    print(json.dumps(report, indent=2))


def main(argv=None):
    parser = argparse.ArgumentParser(prog="gscsim")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", default=None,
                       help="flat key=value config file")
        p.add_argument("--out", default="results")

    p = sub.add_parser("train-codec", help="train the swin JSCC codec")
    common(p)
    p.set_defaults(func=cmd_train_codec)

    p = sub.add_parser("train-sft", help="train the semantic fine-tuning "
                       "module (both stages)")
    common(p)
    p.add_argument("--codec", required=True, help="codec checkpoint path")
    p.set_defaults(func=cmd_train_sft)

    p = sub.add_parser("sweep", help="run the SNR sweep and emit CSV/plots")
    common(p)
    p.add_argument("--codec", default=None)
    p.add_argument("--sft", default=None)
    p.add_argument("--deepjscc", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("baseline", help="train the deepjscc baseline or "
                       "evaluate the classical pipeline")
    common(p)
    p.add_argument("--kind", choices=("deepjscc", "classical"),
                   default="classical")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("mu-run", help="multi-user concurrent run")
    common(p)
    p.add_argument("--codec", default=None)
    p.add_argument("--sft", default=None)
    p.set_defaults(func=cmd_mu_run)

    p = sub.add_parser("timeit", help="compare GSC and MU-GSC runtime")
    common(p)
    p.add_argument("--codec", default=None)
    p.add_argument("--sft", default=None)
    p.add_argument("--reps", type=int, default=5)
    p.set_defaults(func=cmd_timeit)

    args = parser.parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
