"""Multi-user orchestration: per-user data segmentation, concurrent job
execution with failure isolation, and an LRU result cache with atomic
get-or-compute semantics.

Per-job outputs are a pure function of (job, models, seed): all randomness
is substream-derived from (seed, user_id, microbatch), so results do not
depend on worker count or scheduling order.
"""

from __future__ import annotations

import hashlib
import threading
import time
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum

import torch

from . import channel as ch
from . import pipeline as pl
from .metrics import MetricReport

USER_STREAM_SPACING = 1_000_000


class JobStatus(Enum):
    PENDING = "PENDING"
    RUNNING = "RUNNING"
    DONE = "DONE"
    FAILED = "FAILED"


@dataclass
class JobResult:
    refined: torch.Tensor
    decoded: torch.Tensor
    report: MetricReport
    cache_hit: bool = False


@dataclass
class TransmissionJob:
    user_id: int
    images: torch.Tensor
    channel: ch.ChannelConfig
    seed: int = 0
    status: JobStatus = JobStatus.PENDING
    result: JobResult | None = None
    error: str | None = None
    t_start: float | None = None
    t_end: float | None = None

    @property
    def duration(self) -> float | None:
        if self.t_start is None or self.t_end is None:
            return None
        return self.t_end - self.t_start


def segment_users(dataset: torch.Tensor, k_users: int,
                  seed: int = 0) -> list[torch.Tensor]:
    """Disjoint, exhaustive, deterministic partition into k user streams."""
    n = dataset.shape[0]
    if k_users < 1:
        raise ValueError("k_users must be >= 1")
    if k_users > n:
        raise ValueError(f"k_users={k_users} exceeds dataset size {n}")
    g = torch.Generator().manual_seed(seed)
    perm = torch.randperm(n, generator=g)
    splits = [perm[i::k_users].sort().values for i in range(k_users)]
    return [dataset[s] for s in splits]


def cache_key(model_version: str, images: torch.Tensor, channel_kind: str,
              snr_db: float, seed: int) -> str:
    h = hashlib.sha256()
    h.update(model_version.encode())
    h.update(images.numpy().tobytes())
    h.update(channel_kind.encode())
    h.update(repr(float(snr_db)).encode())
    h.update(repr(int(seed)).encode())
    return h.hexdigest()


class LruCache:
    """Bounded LRU cache whose get_or_compute computes each key at most
    once even under racing requests."""

    def __init__(self, capacity: int = 1024):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._values = OrderedDict()
        self._inflight: dict[str, threading.Event] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        self.evictions = 0

    def get_or_compute(self, key: str, producer):
        """Returns (value, hit_flag)."""
        while True:
            with self._lock:
                if key in self._values:
                    self._values.move_to_end(key)
                    self.hits += 1
                    return self._values[key], True
                ev = self._inflight.get(key)
                if ev is None:
                    ev = threading.Event()
                    self._inflight[key] = ev
                    self.misses += 1
                    break
            ev.wait()
            with self._lock:
                if key in self._values:
                    self._values.move_to_end(key)
                    self.hits += 1
                    return self._values[key], True
            # Producer failed; retry as the computing thread.
        try:
            value = producer()
        except BaseException:
            with self._lock:
                self._inflight.pop(key, None)
            ev.set()
            raise
        with self._lock:
            self._values[key] = value
            while len(self._values) > self.capacity:
                self._values.popitem(last=False)
                self.evictions += 1
            self._inflight.pop(key, None)
        ev.set()
        return value, False

    @property
    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0


def process_user(job: TransmissionJob, bundle: pl.ModelBundle,
                 cache: LruCache | None = None) -> TransmissionJob:
    """Full single-user pipeline: encode, transmit, decode, refine, score.

    All models are shared immutable instances; the channel realization is
    derived from (seed, user_id)."""
    job.status = JobStatus.RUNNING
    job.t_start = time.perf_counter()
    try:
        cfg = replace(job.channel, seed=job.seed)
        stream_base = job.user_id * USER_STREAM_SPACING

        def produce():
            decoded, refined = pl.run_gsc(job.images, bundle, cfg,
                                          stream_base=stream_base)
            if refined is None:
                refined = decoded
            return decoded, refined

        hit = False
        if cache is not None:
            key = cache_key(bundle.version, job.images, cfg.kind, cfg.snr_db,
                            job.seed * USER_STREAM_SPACING + job.user_id)
            (decoded, refined), hit = cache.get_or_compute(key, produce)
        else:
            decoded, refined = produce()
        report = MetricReport.compute(job.images, refined)
        job.result = JobResult(refined=refined, decoded=decoded,
                               report=report, cache_hit=hit)
        job.status = JobStatus.DONE
    except Exception as exc:
        job.status = JobStatus.FAILED
        job.error = f"{type(exc).__name__}: {exc}"
    finally:
        job.t_end = time.perf_counter()
    return job


def run_concurrent(jobs: list[TransmissionJob], bundle: pl.ModelBundle,
                   worker_budget: int = 4,
                   cache: LruCache | None = None) -> dict:
    """Execute all jobs on a thread pool; one failed job never aborts the
    others. Returns a timing report."""
    if worker_budget < 1:
        raise ValueError("worker_budget must be >= 1")
    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=worker_budget) as pool:
        list(pool.map(lambda j: process_user(j, bundle, cache), jobs))
    total_wall = time.perf_counter() - t0
    per_user = {j.user_id: j.duration for j in jobs}
    serial_sum = sum(d for d in per_user.values() if d is not None)
    report = {
        "workers": worker_budget,
        "total_wall_s": total_wall,
        "serial_sum_s": serial_sum,
        "per_user_s": per_user,
        "per_image_s": {
            j.user_id: (j.duration / j.images.shape[0]
                        if j.duration is not None else None)
            for j in jobs
        },
        "statuses": {j.user_id: j.status.value for j in jobs},
    }
    if cache is not None:
        report["cache"] = {"hits": cache.hits, "misses": cache.misses,
                           "hit_rate": cache.hit_rate,
                           "evictions": cache.evictions}
    return report
