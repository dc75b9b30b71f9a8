"""Partition records from kernel-weighted particles.

Every destination pixel becomes a particle at ``psi(center)``. The particle
requests area from the 2**d cells around it with bilinear (trilinear in 3D)
weights, and each cell then rescales what it received to sum to one pixel.
Because a cell never hands out more than it has, no bridge clamp is needed.
"""
from __future__ import annotations

import itertools

import numpy as np

from . import _backend
from .core import PartitionRecord, check_flow, num_threads, pixel_centers

__all__ = [
    "kernel_weights",
    "bilinear_weights",
    "trilinear_weights",
    "particle_positions",
    "build_particle_partition",
    "build_particle_partition_3d",
]


def kernel_weights(p, shape) -> list[tuple[tuple, float]]:
    """Multilinear kernel weights of position ``p`` on a grid of ``shape``.

    ``p`` is clamped to ``[0.5, D - 0.5]`` per axis. Returns ``2**d`` pairs
    ``(cell index, weight)``; cells are listed with the last axis varying
    fastest and the weights sum to 1.
    """
    p = np.asarray(p, dtype=np.float64)
    shape = tuple(int(s) for s in shape)
    if p.shape != (len(shape),):
        raise ValueError(f"position must have {len(shape)} components")
    if not np.all(np.isfinite(p)):
        raise ValueError("position must be finite")
    base, frac = [], []
    for x, D in zip(p, shape):
        x = min(max(float(x), 0.5), D - 0.5)
        s = x - 0.5
        b = int(np.floor(s))
        b = min(max(b, 0), max(D - 2, 0))
        base.append(b)
        frac.append(s - b)
    out = []
    for corner in itertools.product((0, 1), repeat=len(shape)):
        w = 1.0
        cell = []
        for k, bit in enumerate(corner):
            w *= frac[k] if bit else 1.0 - frac[k]
            cell.append(min(base[k] + bit, shape[k] - 1))
        out.append((tuple(cell), w))
    return out


def bilinear_weights(p, shape) -> list[tuple[tuple, float]]:
    """Four ``(cell, weight)`` pairs for a 2D position."""
    if len(shape) != 2:
        raise ValueError("bilinear weights need a 2D grid")
    return kernel_weights(p, shape)


def trilinear_weights(p, shape) -> list[tuple[tuple, float]]:
    """Eight ``(cell, weight)`` pairs for a 3D position."""
    if len(shape) != 3:
        raise ValueError("trilinear weights need a 3D grid")
    return kernel_weights(p, shape)


def particle_positions(flow) -> np.ndarray:
    """Particle positions ``center + flow`` flattened to ``(n, ndim)``."""
    flow = check_flow(flow)
    shape = flow.shape[:-1]
    return np.ascontiguousarray((pixel_centers(shape) + flow).reshape(-1, len(shape)))


def build_particle_partition(flow) -> PartitionRecord:
    """Particle-based partition record for a 2D or 3D flow.

    Particles that land outside the domain ``[0, D]`` on any axis request
    nothing, so their destination pixel is vacated; the rest are clamped to
    the outer ring of pixel centers before weighting.
    """
    flow = check_flow(flow)
    shape = flow.shape[:-1]
    offsets, areas, dests = _backend.kernels.particle_partition(
        particle_positions(flow), np.asarray(shape, dtype=np.int64), num_threads())
    return PartitionRecord(shape, offsets, areas, dests)


def build_particle_partition_3d(flow) -> PartitionRecord:
    """Particle partition for a 3D flow of shape ``(D0, D1, D2, 3)``."""
    flow = check_flow(flow)
    if flow.shape[-1] != 3:
        raise ValueError("expected a 3D flow of shape (D0, D1, D2, 3)")
    return build_particle_partition(flow)
