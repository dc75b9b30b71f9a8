"""Brownian-bridge sampling and the finite-N upsampled subimage law.

A bridge ``B_c`` runs on ``[0, 1]`` from 0 to ``c``. Given ``B_c(t) = q`` its
value at ``t' > t`` is Gaussian with mean
``((1 - t') q + (t' - t) c) / (1 - t)`` and variance
``(t' - t)(1 - t') / (1 - t)``. Once ``c`` is integrated out against N(0, 1),
increments over disjoint intervals are independent N(0, length).
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .core import RngKey, standard_normal

EPS_T = 1e-12

__all__ = ["BridgeState", "bridge_step", "bridge_prefix_path", "sample_upsampled_subimage", "EPS_T"]


@dataclass(frozen=True)
class BridgeState:
    c: float
    t: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"bridge time must lie in [0, 1], got {self.t}")


def bridge_step(state: BridgeState, dt: float, key: RngKey) -> BridgeState:
    """Advance the bridge by ``dt`` using the draw addressed by ``key``.

    Steps that land within ``EPS_T`` of 1 (or start there) are terminal and
    return ``q = c`` without consuming randomness.
    """
    if not dt >= 0.0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    t = state.t
    t_new = t + dt
    if t_new > 1.0 + EPS_T:
        raise ValueError(f"step overshoots the bridge end: t + dt = {t_new}")
    if dt == 0.0:
        return state
    if t_new > 1.0:
        t_new = 1.0
    if (1.0 - t_new) < EPS_T or (1.0 - t) < EPS_T:
        return BridgeState(state.c, 1.0, state.c)
    dt = t_new - t
    rem = 1.0 - t_new
    den = 1.0 - t
    q_new = (rem / den) * state.q + (dt / den) * state.c + math.sqrt(dt * rem / den) * standard_normal(key)
    return BridgeState(state.c, t_new, q_new)


def bridge_prefix_path(c: float, times, key: RngKey) -> list[float]:
    """Bridge values at sorted ``times``, sampled autoregressively from ``t = 0``.

    The ``k``-th step uses ``key`` with its draw counter advanced by ``k``.
    """
    times = [float(x) for x in times]
    if any(not 0.0 <= x <= 1.0 for x in times):
        raise ValueError("times must lie in [0, 1]")
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("times must be sorted")
    state = BridgeState(float(c))
    values = []
    for k, x in enumerate(times):
        state = bridge_step(state, max(x - state.t, 0.0), key._replace(draw=key.draw + k))
        values.append(state.q)
    return values


def sample_upsampled_subimage(c: float, N: int, key: RngKey) -> np.ndarray:
    """Draw the ``N*N`` subpixels of a pixel with value ``c``.

    ``X_k = c/N^2 + (Z_k - S/N^2)/N`` with ``Z`` i.i.d. standard normal keyed
    by draw counters ``key.draw .. key.draw + N^2 - 1``. ``X`` sums to ``c``.
    """
    N = int(N)
    if N < 1:
        raise ValueError("upsampling level must be >= 1")
    from . import _backend

    n2 = N * N
    draws = key.draw + np.arange(n2, dtype=np.int64)
    Z = _backend.kernels.normal_array(
        key.seed, np.full(n2, key.pixel, dtype=np.int64), np.full(n2, key.channel, dtype=np.int64), draws)
    nn = float(n2)
    S = np.cumsum(Z)[-1]
    return c / nn + (Z - S / nn) / float(N)
