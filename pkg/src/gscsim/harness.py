"""Experiment harness: configuration, SNR sweeps with paired channel
realizations across systems, CSV/plot emission, and runtime measurement.
"""

from __future__ import annotations

import csv
import hashlib
import json
import statistics
import time
from dataclasses import dataclass
from pathlib import Path

import torch

from . import channel as ch
from . import metrics as mx
from . import orchestrator as orch
from . import pipeline as pl
from .baselines.classical import (ClassicalConfig, classical_pipeline,
                                  outcome_to_image)

SYSTEMS = ("GSC", "NGF", "DEEPJSCC", "CLASSICAL", "MU_GSC")
CSV_COLUMNS = ("system", "channel", "snr_db", "seed", "psnr_db", "lpips",
               "mse", "runtime_s", "n_images")


@dataclass
class ExperimentConfig:
    systems: tuple = ("GSC", "NGF", "DEEPJSCC", "CLASSICAL")
    snr_grid: tuple = (0.0, 3.0, 6.0, 9.0, 12.0, 15.0)
    channels: tuple = (ch.AWGN, ch.RAYLEIGH)
    seeds: tuple = (0,)
    n_eval: int = 200
    dataset: str | None = None     # None: deterministic synthetic images
    out_dir: str = "results"
    codec_ckpt: str | None = None
    sft_ckpt: str | None = None
    deepjscc_ckpt: str | None = None
    jpeg_quality: int = 75
    mu_users: int = 3
    mu_workers: int = 3
    cache_capacity: int = 1024
    plots: bool = True

    def __post_init__(self):
        unknown = set(self.systems) - set(SYSTEMS)
        if unknown:
            raise ValueError(f"unknown systems: {sorted(unknown)}")
        if not self.systems or not self.snr_grid:
            raise ValueError("systems and snr grid must be nonempty")
        if len(self.seeds) < 1:
            raise ValueError("at least one seed is required")


def parse_config_file(path) -> dict:
    """Flat `key = value` text config; values are JSON literals where
    possible, comma lists become tuples."""
    out = {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{ln}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if "," in val:
            out[key] = tuple(_parse_scalar(v.strip())
                             for v in val.split(",") if v.strip())
        else:
            out[key] = _parse_scalar(val)
    return out


def _parse_scalar(s: str):
    try:
        return json.loads(s)
    except json.JSONDecodeError:
        return s


def load_eval_set(cfg: ExperimentConfig) -> torch.Tensor:
    from . import dataset as ds
    if cfg.dataset:
        data = ds.ingest_dataset(cfg.dataset)
    else:
        data = ds.make_synthetic(max(cfg.n_eval, 1), seed=123)
    return data[:cfg.n_eval]


def _eval_rows(system, channel_kind, snr, seed, original, received, dt):
    rep = mx.MetricReport.compute(original, received)
    return {
        "system": system, "channel": channel_kind, "snr_db": float(snr),
        "seed": int(seed), "psnr_db": rep.psnr_db, "lpips": rep.lpips,
        "mse": rep.mse, "runtime_s": dt, "n_images": rep.n_images,
    }


def sweep(cfg: ExperimentConfig, bundle: pl.ModelBundle,
          log=print) -> list[dict]:
    """Evaluate each configured system over the SNR grid with paired
    channel substreams; emits results.csv and per-channel plots."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    images = load_eval_set(cfg)
    classical_cfg = ClassicalConfig(jpeg_quality=cfg.jpeg_quality)
    rows = []
    neural = {"GSC", "NGF", "MU_GSC"}
    want = list(cfg.systems)
    if neural & set(want) and bundle.codec is None:
        log("warning: codec checkpoint missing, skipping "
            f"{sorted(neural & set(want))}")
        want = [s for s in want if s not in neural]
    if "GSC" in want and bundle.sft is None:
        log("warning: fine-tuning checkpoint missing, skipping GSC")
        want = [s for s in want if s != "GSC"]
    if "DEEPJSCC" in want and bundle.deepjscc is None:
        log("warning: deepjscc checkpoint missing, skipping DEEPJSCC")
        want = [s for s in want if s != "DEEPJSCC"]

    for kind in cfg.channels:
        for seed in cfg.seeds:
            for snr in cfg.snr_grid:
                ccfg = ch.ChannelConfig(kind=kind, snr_db=float(snr),
                                        seed=int(seed))
                s_hat = None
                if {"GSC", "NGF"} & set(want):
                    t0 = time.perf_counter()
                    s_hat = pl.decode_images(images, bundle.codec, ccfg)
                    t_dec = time.perf_counter() - t0
                    log(f"[sweep] {kind} snr={snr} seed={seed} "
                        f"s_hat sha={_tensor_hash(s_hat)[:12]}")
                if "NGF" in want:
                    rows.append(_eval_rows("NGF", kind, snr, seed, images,
                                           s_hat, t_dec))
                if "GSC" in want:
                    t0 = time.perf_counter()
                    refined = pl.refine_images(s_hat, bundle.sft, ccfg)
                    rows.append(_eval_rows(
                        "GSC", kind, snr, seed, images, refined,
                        t_dec + time.perf_counter() - t0))
                if "DEEPJSCC" in want:
                    t0 = time.perf_counter()
                    dj = pl.run_deepjscc(images, bundle, ccfg)
                    rows.append(_eval_rows("DEEPJSCC", kind, snr, seed,
                                           images, dj,
                                           time.perf_counter() - t0))
                if "CLASSICAL" in want:
                    t0 = time.perf_counter()
                    outs, fails = [], 0
                    for i in range(images.shape[0]):
                        oc = classical_pipeline(images[i], ccfg,
                                                classical_cfg, stream=i)
                        img, ok = outcome_to_image(oc, images[i].shape)
                        outs.append(img)
                        fails += not ok
                    rec = torch.stack(outs)
                    row = _eval_rows("CLASSICAL", kind, snr, seed, images,
                                     rec, time.perf_counter() - t0)
                    log(f"[sweep] CLASSICAL {kind} snr={snr} "
                        f"failures={fails}/{images.shape[0]}")
                    rows.append(row)
                if "MU_GSC" in want:
                    t0 = time.perf_counter()
                    streams = orch.segment_users(images, cfg.mu_users,
                                                 seed=seed)
                    jobs = [orch.TransmissionJob(user_id=u, images=st,
                                                 channel=ccfg, seed=seed)
                            for u, st in enumerate(streams)]
                    orch.run_concurrent(jobs, bundle,
                                        worker_budget=cfg.mu_workers)
                    rec = torch.cat([j.result.refined for j in jobs])
                    org = torch.cat([j.images for j in jobs])
                    rows.append(_eval_rows("MU_GSC", kind, snr, seed, org,
                                           rec, time.perf_counter() - t0))
    write_csv(out_dir / "results.csv", rows)
    if cfg.plots:
        emit_plots(rows, out_dir)
    return rows


def _tensor_hash(t: torch.Tensor) -> str:
    return hashlib.sha256(t.numpy().tobytes()).hexdigest()


def write_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for row in rows:
            out = dict(row)
            for key in ("snr_db", "psnr_db", "lpips", "mse", "runtime_s"):
                out[key] = repr(float(out[key]))
            w.writerow(out)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def emit_plots(rows, out_dir) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    channels = sorted({r["channel"] for r in rows})
    for kind in channels:
        for metric, better in (("psnr_db", "higher"), ("lpips", "lower")):
            fig, ax = plt.subplots(figsize=(5, 4))
            systems = sorted({r["system"] for r in rows
                              if r["channel"] == kind})
            for system in systems:
                pts = sorted((r["snr_db"], r[metric]) for r in rows
                             if r["channel"] == kind
                             and r["system"] == system)
                snrs = sorted({p[0] for p in pts})
                means = [statistics.fmean(v for s, v in pts if s == snr)
                         for snr in snrs]
                ax.plot(snrs, means, marker="o", label=system)
            ax.set_xlabel("SNR (dB)")
            ax.set_ylabel(f"{metric} ({better} is better)")
            ax.set_title(f"{kind} channel")
            ax.legend()
            fig.tight_layout()
            fig.savefig(out_dir / f"{metric}_vs_snr_{kind.lower()}.png",
                        dpi=120)
            plt.close(fig)


def timeit(fn, reps: int = 5) -> dict:
    """Median wall-clock seconds of at least five repetitions."""
    reps = max(reps, 5)
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return {"median_s": statistics.median(times), "raw_s": times,
            "reps": reps}
