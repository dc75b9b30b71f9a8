"""Timing and memory harness for the warp kernels.

The timed region covers record construction plus the warp itself. Prior
generation and any I/O happen before the clock starts.
"""
from __future__ import annotations

import resource
import statistics
import time
import tracemalloc
from dataclasses import dataclass

import numpy as np

from . import _backend
from .core import make_prior_noise
from .flows import vortex_flow

__all__ = ["BenchResult", "kernel_call", "run_bench"]


@dataclass(frozen=True)
class BenchResult:
    method: str
    size: int
    reps: int
    backend: str
    median_ms: float
    mad_ms: float
    mean_ms: float
    min_ms: float
    peak_bytes: int
    maxrss_kb: int

    def __str__(self):
        return (f"{self.method} size={self.size} reps={self.reps} backend={self.backend}: "
                f"median {self.median_ms:.2f} ms (MAD {self.mad_ms:.2f}), mean {self.mean_ms:.2f} ms, "
                f"min {self.min_ms:.2f} ms, peak traced {self.peak_bytes / 2 ** 20:.1f} MiB, "
                f"max RSS {self.maxrss_kb / 1024:.1f} MiB")


def kernel_call(method: str, upsample: int = 8):
    """Return ``f(prior, flow, seed)`` running one full warp with ``method``."""
    from .hiwyn import hiwyn_warp
    from .warp import build_record, warp_noise

    if method in ("grid", "particle"):
        return lambda prior, flow, seed: warp_noise(prior, build_record(flow, method), seed)
    if method == "hiwyn":
        return lambda prior, flow, seed: hiwyn_warp(prior, flow, upsample, seed)
    raise ValueError(f"cannot benchmark method {method!r}")


def run_bench(size: int = 1024, reps: int = 10, method: str = "grid", upsample: int = 8,
              backend: str | None = None, seed: int = 0, flow=None, warmup: bool = True) -> BenchResult:
    """Time ``reps`` warps of a ``size x size`` prior; peak memory from one traced extra run."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    prior = make_prior_noise((size, size), 1, seed)
    if flow is None:
        flow = vortex_flow((size, size), angle=0.8)
    fn = kernel_call(method, upsample)
    with _backend.use(backend or _backend.name()):
        bname = _backend.name()
        if warmup:
            fn(prior, flow, seed)
        times = []
        for r in range(reps):
            t0 = time.perf_counter()
            fn(prior, flow, seed + r)
            times.append((time.perf_counter() - t0) * 1e3)
        tracemalloc.start()
        try:
            tracemalloc.reset_peak()
            fn(prior, flow, seed)
            _, peak = tracemalloc.get_traced_memory()
        finally:
            tracemalloc.stop()
    med = statistics.median(times)
    mad = statistics.median([abs(t - med) for t in times])
    rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    return BenchResult(method, size, reps, bname, med, mad, float(np.mean(times)), min(times), int(peak), int(rss))
