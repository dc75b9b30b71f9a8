"""Synthetic flow fields used by tests, experiments and the CLI.

All return float64 arrays of shape ``(*shape, ndim)`` holding forward
displacements in pixels.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .core import pixel_centers

__all__ = ["zero_flow", "uniform_flow", "shear_flow", "vortex_flow", "collapse_flow", "random_smooth_flow"]


def zero_flow(shape) -> np.ndarray:
    shape = tuple(int(s) for s in shape)
    return np.zeros(shape + (len(shape),))


def uniform_flow(shape, shift) -> np.ndarray:
    """Constant displacement ``shift`` (one component per axis)."""
    shift = np.asarray(shift, dtype=np.float64)
    if shift.shape != (len(shape),):
        raise ValueError("shift needs one component per axis")
    return zero_flow(shape) + shift


def shear_flow(shape, kappa: float) -> np.ndarray:
    """Axis-0 displacement proportional to the axis-1 coordinate: ``(kappa * y, 0)``."""
    f = zero_flow(shape)
    f[..., 0] = kappa * pixel_centers(shape)[..., 1]
    return f


def vortex_flow(shape, angle: float = 0.5, radius: float | None = None, center=None) -> np.ndarray:
    """Swirl around ``center``; the rotation angle decays as a Gaussian of the radius.

    Points at distance ``r`` rotate by ``angle * exp(-r**2 / (2 radius**2))``.
    Each ring rotates rigidly, so the map is a smooth area-preserving bijection.
    """
    shape = tuple(int(s) for s in shape)
    if len(shape) != 2:
        raise ValueError("vortex flow is 2D")
    if center is None:
        center = (shape[0] / 2.0, shape[1] / 2.0)
    if radius is None:
        radius = min(shape) / 4.0
    x = pixel_centers(shape)
    d = x - np.asarray(center, dtype=np.float64)
    r2 = (d ** 2).sum(-1)
    th = angle * np.exp(-r2 / (2.0 * radius ** 2))
    cs, sn = np.cos(th), np.sin(th)
    rot = np.stack([cs * d[..., 0] - sn * d[..., 1], sn * d[..., 0] + cs * d[..., 1]], axis=-1)
    return rot - d


def collapse_flow(shape, point=None) -> np.ndarray:
    """Send every pixel center to one ``point`` (default: domain center)."""
    shape = tuple(int(s) for s in shape)
    if point is None:
        point = [s / 2.0 for s in shape]
    return np.asarray(point, dtype=np.float64) - pixel_centers(shape)


def random_smooth_flow(shape, amplitude: float = 1.0, smoothness: float = 2.0, seed: int = 0) -> np.ndarray:
    """Gaussian-filtered random displacement with max-abs ``amplitude`` per component."""
    shape = tuple(int(s) for s in shape)
    rng = np.random.default_rng(seed)
    comps = []
    for _ in shape:
        c = ndimage.gaussian_filter(rng.standard_normal(shape), smoothness, mode="wrap")
        m = np.abs(c).max()
        comps.append(c * (amplitude / m) if m > 0 else c)
    return np.stack(comps, axis=-1)
