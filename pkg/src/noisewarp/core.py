"""Shared types, coordinate conventions and counter-based randomness.

Conventions used throughout the package:

* A noise tensor is a float64 array of shape ``(channels, *spatial)`` with two
  or three spatial axes.
* A flow field is a float64 array of shape ``(*spatial, ndim)``; component
  ``k`` is the displacement along spatial axis ``k`` in pixel units, and the
  deformation is ``psi(x) = x + flow(x)``.
* Pixel ``(i, j)`` occupies the unit cell ``[i, i+1] x [j, j+1]`` and its
  center sits at ``(i + 0.5, j + 0.5)``. Partition areas are fractions of one
  such cell, so a fully distributed source pixel consumes bridge time 1.

Random numbers are never drawn from a stateful generator. Every sample is a
pure function of ``(seed, pixel, channel, draw)``, which keeps results
identical for any evaluation order or thread count.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "FormatError",
    "InvariantError",
    "RngKey",
    "derive_seed",
    "standard_normal",
    "uniform",
    "make_prior_noise",
    "check_noise",
    "check_flow",
    "num_threads",
    "MASK64",
    "PartitionRecord",
    "pixel_centers",
]

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
SECOND_LANE = 0xD1B54A32D192ED03
TWO_PI = 6.283185307179586
INV_2_53 = 1.0 / 9007199254740992.0

# stream tags for derive_seed; keep prior, bridge, vacated and upsampling
# draws on disjoint key spaces even when callers reuse one seed
STREAM_PRIOR = 1
STREAM_BRIDGE = 2
STREAM_VACATED = 3
STREAM_UPSAMPLE = 4
STREAM_FRAME = 5
STREAM_RUN = 6


class FormatError(ValueError):
    """Malformed file contents; ``offset`` is the byte where parsing failed."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class InvariantError(RuntimeError):
    """An internal postcondition did not hold."""


class RngKey(NamedTuple):
    """Address of one random draw."""

    seed: int
    pixel: int = 0
    channel: int = 0
    draw: int = 0


def splitmix64(x: int) -> int:
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def lane_hash(seed: int, pixel: int, channel: int) -> int:
    h = splitmix64(seed & MASK64)
    h = splitmix64(h ^ (pixel & MASK64))
    return splitmix64(h ^ (channel & MASK64))


def derive_seed(seed: int, *tags: int) -> int:
    """Hash ``seed`` with integer tags into an independent 64-bit stream seed."""
    h = splitmix64(seed & MASK64)
    for tag in tags:
        h = splitmix64(h ^ (tag & MASK64))
    return h


def _draw_bits(key: RngKey) -> tuple[int, int]:
    h1 = splitmix64(lane_hash(key.seed, key.pixel, key.channel) ^ (key.draw & MASK64))
    h2 = splitmix64(h1 ^ SECOND_LANE)
    return h1, h2


def uniform(key: RngKey) -> float:
    """Deterministic U(0, 1) draw (open interval) for ``key``."""
    h1, _ = _draw_bits(key)
    return ((h1 >> 11) + 0.5) * INV_2_53


def standard_normal(key: RngKey) -> float:
    """Deterministic N(0, 1) draw for ``key`` (Box-Muller, cosine branch)."""
    h1, h2 = _draw_bits(key)
    u1 = ((h1 >> 11) + 0.5) * INV_2_53
    u2 = (h2 >> 11) * INV_2_53
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(TWO_PI * u2)


def num_threads() -> int:
    """Worker count for parallel kernels, from ``NOISEWARP_THREADS`` (0 = all cores)."""
    raw = os.environ.get("NOISEWARP_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"NOISEWARP_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("NOISEWARP_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def _check_shape(shape) -> tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if len(shape) not in (2, 3):
        raise ValueError(f"expected 2 or 3 spatial axes, got shape {shape}")
    if any(s <= 0 for s in shape):
        raise ValueError(f"extents must be positive, got {shape}")
    return shape


def make_prior_noise(shape, channels: int = 1, seed: int = 0) -> np.ndarray:
    """Gaussian white noise of shape ``(channels, *shape)``.

    Element ``[ch, pixel]`` is the standard-normal draw keyed by
    ``(seed, pixel, ch)`` on the prior stream.
    """
    from . import _backend

    shape = _check_shape(shape)
    if channels <= 0:
        raise ValueError("channels must be positive")
    n = math.prod(shape)
    flat = _backend.kernels.prior_noise(derive_seed(seed, STREAM_PRIOR), n, int(channels))
    return flat.reshape((channels,) + shape)


def check_noise(noise, ndim: int | None = None) -> np.ndarray:
    """Validate a noise tensor and return it as float64 ``(C, *spatial)``.

    A bare 2D/3D array without channel axis is promoted to one channel when
    ``ndim`` tells the spatial rank.
    """
    arr = np.asarray(noise, dtype=np.float64)
    if ndim is not None and arr.ndim == ndim:
        arr = arr[None]
    if arr.ndim not in (3, 4):
        raise ValueError(f"noise must have shape (C, *spatial) with 2 or 3 spatial axes, got {arr.shape}")
    _check_shape(arr.shape[1:])
    if not np.all(np.isfinite(arr)):
        raise ValueError("noise contains non-finite values")
    return np.ascontiguousarray(arr)


def check_flow(flow, shape=None) -> np.ndarray:
    """Validate a flow field of shape ``(*spatial, ndim)``."""
    arr = np.asarray(flow, dtype=np.float64)
    if arr.ndim < 3 or arr.shape[-1] != arr.ndim - 1:
        raise ValueError(f"flow must have shape (*spatial, ndim), got {arr.shape}")
    _check_shape(arr.shape[:-1])
    if shape is not None and tuple(arr.shape[:-1]) != tuple(shape):
        raise ValueError(f"flow grid {arr.shape[:-1]} does not match noise grid {tuple(shape)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("flow contains non-finite values")
    return np.ascontiguousarray(arr)


def pixel_centers(shape) -> np.ndarray:
    """Centers of all pixels, shape ``(*shape, ndim)``."""
    axes = [np.arange(s, dtype=np.float64) + 0.5 for s in shape]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


@dataclass(frozen=True, eq=False)
class PartitionRecord:
    """Per-source lists of ``(area, destination)`` entries in CSR layout.

    Entries of source ``s`` are ``areas[offsets[s]:offsets[s+1]]`` and
    ``dests[...]``; destinations are flat row-major pixel indices on the same
    grid as the sources, listed in increasing order within each source.
    """

    shape: tuple
    offsets: np.ndarray
    areas: np.ndarray
    dests: np.ndarray

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        object.__setattr__(self, "shape", shape)
        n = math.prod(shape)
        offsets = np.ascontiguousarray(self.offsets, dtype=np.int64)
        areas = np.ascontiguousarray(self.areas, dtype=np.float64)
        dests = np.ascontiguousarray(self.dests, dtype=np.int32)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "areas", areas)
        object.__setattr__(self, "dests", dests)
        if offsets.shape != (n + 1,) or offsets[0] != 0 or np.any(np.diff(offsets) < 0):
            raise ValueError("offsets must be a non-decreasing array of length n_pixels + 1 starting at 0")
        if offsets[-1] != len(areas) or len(areas) != len(dests):
            raise ValueError("offsets, areas and dests disagree in length")
        if len(areas) and (not np.all(np.isfinite(areas)) or areas.min() <= 0.0):
            raise ValueError("record areas must be finite and positive")
        if len(dests) and (dests.min() < 0 or dests.max() >= n):
            raise ValueError("record destination index out of bounds")

    @property
    def n_pixels(self) -> int:
        return len(self.offsets) - 1

    def __len__(self) -> int:
        return self.n_pixels

    def entries(self, source) -> list[tuple[float, tuple]]:
        """Entries of one source pixel as ``(area, destination multi-index)``."""
        s = source if isinstance(source, (int, np.integer)) else int(np.ravel_multi_index(source, self.shape))
        lo, hi = self.offsets[s], self.offsets[s + 1]
        return [(float(a), tuple(int(x) for x in np.unravel_index(d, self.shape)))
                for a, d in zip(self.areas[lo:hi], self.dests[lo:hi])]

    def source_sums(self) -> np.ndarray:
        """Total area handed out by each source pixel (grid shaped)."""
        sums = np.zeros(self.n_pixels)
        src = np.repeat(np.arange(self.n_pixels), np.diff(self.offsets))
        np.add.at(sums, src, self.areas)
        return sums.reshape(self.shape)

    def dest_areas(self) -> np.ndarray:
        """Requested area per destination (before any clamping)."""
        out = np.zeros(self.n_pixels)
        np.add.at(out, self.dests, self.areas)
        return out.reshape(self.shape)

    def same_as(self, other: "PartitionRecord") -> bool:
        return (self.shape == other.shape and np.array_equal(self.offsets, other.offsets)
                and np.array_equal(self.areas, other.areas) and np.array_equal(self.dests, other.dests))

    @classmethod
    def from_lists(cls, shape, lists) -> "PartitionRecord":
        """Build from per-source lists of ``(area, dest)``; ``dest`` flat or multi-index."""
        shape = tuple(int(s) for s in shape)
        offsets = [0]
        areas, dests = [], []
        for lst in lists:
            for a, d in lst:
                if not isinstance(d, (int, np.integer)):
                    d = int(np.ravel_multi_index(tuple(d), shape))
                areas.append(float(a))
                dests.append(int(d))
            offsets.append(len(areas))
        return cls(shape, np.asarray(offsets), np.asarray(areas), np.asarray(dests))

    @classmethod
    def identity(cls, shape) -> "PartitionRecord":
        n = math.prod(shape)
        return cls(tuple(shape), np.arange(n + 1), np.ones(n), np.arange(n))
