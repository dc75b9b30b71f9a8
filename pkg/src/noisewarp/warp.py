"""Infinite-resolution noise warping driven by a partition record.

Each source pixel value ``c`` is the endpoint of a Brownian bridge. Walking
the pixel's record entries advances bridge time by each entry's area and
sends the bridge increment to that entry's destination. Destinations are then
divided by the square root of the time they received, which makes every
output pixel standard normal and keeps distinct pixels independent.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .core import (STREAM_BRIDGE, STREAM_FRAME, STREAM_VACATED, InvariantError,
                   PartitionRecord, check_flow, check_noise, derive_seed, num_threads)

__all__ = ["WarpOutput", "warp_noise", "warp_sequence", "build_record", "warp_flow", "METHODS"]

METHODS = ("grid", "particle", "hiwyn", "hiwyn-eulerian", "bilinear", "bicubic", "nearest")


@dataclass(frozen=True, eq=False)
class WarpOutput:
    """Warped noise plus per-destination bookkeeping.

    ``area`` is the bridge time each destination actually received (after
    clamping) and ``vacated`` marks destinations that received none and were
    refilled with fresh noise.
    """

    warped: np.ndarray
    area: np.ndarray
    vacated: np.ndarray
    clamp_count: int = 0

    @property
    def vacated_pixels(self) -> list[tuple]:
        return [tuple(int(x) for x in ix) for ix in np.argwhere(self.vacated)]


def fill_vacated(out: np.ndarray, vacated_flat: np.ndarray, seed: int) -> None:
    """Overwrite vacated destinations of ``out`` (shape ``(C, n)``) with fresh N(0, 1)."""
    idx = np.flatnonzero(vacated_flat).astype(np.int64)
    if len(idx) == 0:
        return
    vseed = derive_seed(seed, STREAM_VACATED)
    zero = np.zeros(len(idx), dtype=np.int64)
    for ch in range(out.shape[0]):
        out[ch, idx] = _backend.kernels.normal_array(vseed, idx, np.full(len(idx), ch, dtype=np.int64), zero)


def warp_noise(prior, record: PartitionRecord, seed: int = 0) -> WarpOutput:
    """Warp ``prior`` (``(C, *shape)``) through ``record``.

    Bridge time per source is clamped at 1, so over-subscribed sources skip
    their later requests; ``clamp_count`` counts how often that happened.
    """
    prior = check_noise(prior, ndim=len(record.shape))
    if tuple(prior.shape[1:]) != tuple(record.shape):
        raise ValueError(f"prior grid {prior.shape[1:]} does not match record grid {record.shape}")
    C = prior.shape[0]
    n = record.n_pixels
    acc, consumed, clamps = _backend.kernels.bridge_scatter(
        prior.reshape(C, n), record.offsets, record.areas, record.dests,
        derive_seed(seed, STREAM_BRIDGE), n, num_threads())
    vacated = consumed <= 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = acc / np.sqrt(consumed)
    fill_vacated(out, vacated, seed)
    if np.any(consumed < 0.0) or not np.all(np.isfinite(out)):
        raise InvariantError("warp produced negative area or non-finite noise")
    return WarpOutput(out.reshape(prior.shape), consumed.reshape(record.shape),
                      vacated.reshape(record.shape), int(clamps))


def build_record(flow, method: str) -> PartitionRecord:
    """Partition record for ``flow`` with ``method`` in ``{"grid", "particle"}``."""
    if method == "grid":
        from .partition_grid import build_grid_partition
        return build_grid_partition(flow)
    if method == "particle":
        from .partition_particle import build_particle_partition
        return build_particle_partition(flow)
    raise ValueError(f"unknown partition method {method!r}")


def warp_sequence(prior, flows, method: str = "particle", seed: int = 0) -> list[np.ndarray]:
    """Warp ``prior`` through ``flows`` one after another; returns all frames.

    Frame ``k + 1`` uses the seed ``derive_seed(seed, FRAME, k)``. Records are
    reused when consecutive flows are identical.
    """
    prior = check_noise(prior)
    frames = [prior]
    prev_flow, record = None, None
    for k, flow in enumerate(flows):
        flow = check_flow(flow, prior.shape[1:])
        if prev_flow is None or not np.array_equal(flow, prev_flow):
            record = build_record(flow, method)
            prev_flow = flow
        frames.append(warp_noise(frames[-1], record, derive_seed(seed, STREAM_FRAME, k)).warped)
    return frames


def warp_flow(prior, flow, method: str = "particle", seed: int = 0, upsample: int = 8) -> np.ndarray:
    """Warp with any supported method and return the noise tensor only."""
    prior = check_noise(prior)
    flow = check_flow(flow, prior.shape[1:])
    if method in ("grid", "particle"):
        return warp_noise(prior, build_record(flow, method), seed).warped
    if method == "hiwyn":
        from .hiwyn import hiwyn_warp
        return hiwyn_warp(prior, flow, upsample, seed).warped
    if method == "hiwyn-eulerian":
        from .hiwyn import hiwyn_warp_eulerian
        return hiwyn_warp_eulerian(prior, flow, upsample, seed).warped
    if method in ("bilinear", "bicubic", "nearest"):
        from .evaluation import warp_interpolated
        return warp_interpolated(prior, flow, method)
    raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
