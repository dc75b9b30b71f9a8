"""Finite-resolution upsampling reference warp.

Every pixel is split into ``N x N`` subpixels whose values sum to the pixel
(conditional white-noise upsampling). Each subpixel center is owned by at most
one deformed destination octagon, the lowest destination index among those
containing it. A destination is the sum of the subpixels it owns divided by
``sqrt(count / N**2)``.

Two evaluation orders are provided. ``hiwyn_warp`` gathers per destination.
``hiwyn_warp_eulerian`` scatters per source, sending consecutive prefix-sum
segments to each overlapping destination. That only uses the owner counts, so
its values differ from the gather but its distribution is the same.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .core import STREAM_UPSAMPLE, check_flow, check_noise, derive_seed, num_threads
from .warp import WarpOutput, fill_vacated

__all__ = ["UpsampledImage", "upsample_noise", "hiwyn_owner", "hiwyn_warp", "hiwyn_warp_eulerian"]


@dataclass(frozen=True, eq=False)
class UpsampledImage:
    """Upsampled noise stored as per-pixel prefix sums.

    ``prefix[ch, s, k]`` is the sum of subpixels ``0..k`` of pixel ``s``
    (row-major within the pixel); its last entry equals the pixel value.
    """

    prefix: np.ndarray
    N: int
    shape: tuple

    def subpixels(self) -> np.ndarray:
        """Subpixel values, shape ``(C, n, N*N)``."""
        return np.diff(self.prefix, axis=-1, prepend=0.0)

    def assemble(self) -> np.ndarray:
        """The ``(C, N*H, N*W)`` upsampled image."""
        C = self.prefix.shape[0]
        H, W = self.shape
        N = self.N
        sub = self.subpixels().reshape(C, H, W, N, N)
        return sub.transpose(0, 1, 3, 2, 4).reshape(C, H * N, W * N)


def upsample_noise(prior, N: int, seed: int = 0) -> UpsampledImage:
    """Upsample a 2D noise tensor by ``N`` per axis, conditioned on the pixel values."""
    N = int(N)
    if N < 1:
        raise ValueError("upsampling level N must be >= 1")
    prior = check_noise(prior, ndim=2)
    if prior.ndim != 3:
        raise ValueError("upsampling reference supports 2D noise only")
    C, H, W = prior.shape
    pref = _backend.kernels.upsample_prefix(prior.reshape(C, H * W), N, derive_seed(seed, STREAM_UPSAMPLE),
                                            num_threads())
    return UpsampledImage(pref, N, (H, W))


def hiwyn_owner(flow, N: int) -> np.ndarray:
    """Owning destination of each subpixel center, int32 ``(H*W, N*N)``; -1 if none.

    Depends only on the flow, so it can be computed once and reused across
    runs with different noise.
    """
    N = int(N)
    if N < 1:
        raise ValueError("upsampling level N must be >= 1")
    flow = check_flow(flow)
    if flow.shape[-1] != 2:
        raise ValueError("upsampling reference supports 2D flows only")
    return _backend.kernels.subpixel_owner(flow, N)


def _finish(sums, counts, N, shape, seed) -> WarpOutput:
    area = counts / float(N * N)
    vacated = counts == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = sums / np.sqrt(area)
    fill_vacated(out, vacated, seed)
    C = sums.shape[0]
    return WarpOutput(out.reshape((C,) + tuple(shape)), area.reshape(shape), vacated.reshape(shape), 0)


def _prepare(prior, flow, N, seed, owner):
    N = int(N)
    if N < 1:
        raise ValueError("upsampling level N must be >= 1")
    prior = check_noise(prior, ndim=2)
    flow = check_flow(flow, prior.shape[1:])
    up = upsample_noise(prior, N, seed)
    if owner is None:
        owner = hiwyn_owner(flow, N)
    elif owner.shape != (up.prefix.shape[1], N * N):
        raise ValueError("owner array does not match grid and N")
    return prior, flow, up, np.ascontiguousarray(owner, dtype=np.int32)


def hiwyn_warp(prior, flow, N: int, seed: int = 0, owner=None) -> WarpOutput:
    """Gather form: each destination sums the subpixels it owns."""
    prior, flow, up, owner = _prepare(prior, flow, N, seed, owner)
    sums, counts = _backend.kernels.hiwyn_gather(up.prefix, owner, flow, num_threads())
    return _finish(sums, counts, up.N, up.shape, seed)


def hiwyn_warp_eulerian(prior, flow, N: int, seed: int = 0, owner=None) -> WarpOutput:
    """Scatter form: each source sends prefix-sum segments to its overlapping destinations."""
    prior, flow, up, owner = _prepare(prior, flow, N, seed, owner)
    sums, counts = _backend.kernels.hiwyn_scatter(up.prefix, owner)
    return _finish(sums, counts, up.N, up.shape, seed)
