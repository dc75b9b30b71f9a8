"""Interpolation baselines and the statistical battery.

The tests here check that warped noise is still white Gaussian noise
(Kolmogorov-Smirnov against N(0, 1), Moran's I for spatial correlation) and
measure how far the finite-N upsampling reference is from the bridge warp
(per-pixel 1D 2-Wasserstein distance).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .core import STREAM_RUN, check_flow, check_noise, derive_seed, pixel_centers

__all__ = [
    "StatReport",
    "warp_interpolated",
    "ks_test_standard_normal",
    "kolmogorov_sf",
    "morans_i",
    "wasserstein2_1d",
    "per_pixel_wasserstein",
    "convergence_experiment",
    "white_noise_experiment",
]


@dataclass(frozen=True)
class StatReport:
    name: str
    statistic: float
    p_value: float
    n: int

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value out of range: {self.p_value}")

    def __str__(self):
        return f"{self.name}: statistic={self.statistic:.6g} p={self.p_value:.6g} n={self.n}"


# ------------------------------------------------------------ interpolation

def _keys(x, a=-0.5):
    x = np.abs(x)
    x2, x3 = x * x, x * x * x
    near = (a + 2.0) * x3 - (a + 3.0) * x2 + 1.0
    far = a * x3 - 5.0 * a * x2 + 8.0 * a * x - 4.0 * a
    return np.where(x <= 1.0, near, np.where(x < 2.0, far, 0.0))


def _taps(pos, D, mode):
    """Per-axis (indices, weights) lists for sampling at continuous ``pos``."""
    s = pos - 0.5
    if mode == "nearest":
        return [np.clip(np.floor(pos).astype(np.int64), 0, D - 1)], [np.ones_like(pos)]
    b = np.floor(s)
    f = s - b
    b = b.astype(np.int64)
    if mode == "bilinear":
        return [np.clip(b, 0, D - 1), np.clip(b + 1, 0, D - 1)], [1.0 - f, f]
    if mode == "bicubic":
        idx = [np.clip(b + k, 0, D - 1) for k in (-1, 0, 1, 2)]
        w = [_keys(f + 1.0), _keys(f), _keys(1.0 - f), _keys(2.0 - f)]
        return idx, w
    raise ValueError(f"unknown interpolation mode {mode!r}")


def warp_interpolated(noise, flow, mode: str = "bilinear") -> np.ndarray:
    """Sample ``noise`` at ``psi(x) = x + flow(x)`` with edge clamping.

    This follows the same direction as the partition warps, where destination
    ``x`` collects the noise found in the region ``psi`` sends it to. Pixel
    values live at pixel centers. The output is not renormalized, which is why
    these baselines lose variance.
    """
    flow = check_flow(flow)
    noise = check_noise(noise, ndim=flow.shape[-1])
    shape = noise.shape[1:]
    if tuple(flow.shape[:-1]) != tuple(shape):
        raise ValueError("flow and noise grids differ")
    src = pixel_centers(shape) + flow
    taps = [_taps(src[..., ax], shape[ax], mode) for ax in range(len(shape))]
    out = np.zeros_like(noise)
    for combo in itertools.product(*[range(len(t[0])) for t in taps]):
        w = np.ones(shape)
        idx = []
        for ax, k in enumerate(combo):
            idx.append(taps[ax][0][k])
            w = w * taps[ax][1][k]
        out += w * noise[(slice(None),) + tuple(idx)]
    return out


# -------------------------------------------------------------------- tests

def kolmogorov_sf(lam: float, tol: float = 1e-10) -> float:
    """Survival function of the limiting Kolmogorov distribution at ``lam``."""
    if lam <= 0.0:
        return 1.0
    if lam < 1.0:
        # theta-function form converges fast for small arguments
        s, k = 0.0, 1
        c = math.sqrt(2.0 * math.pi) / lam
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * math.pi ** 2 / (8.0 * lam * lam))
            s += term
            if c * term < tol:
                break
            k += 1
        return min(max(1.0 - c * s, 0.0), 1.0)
    s, k = 0.0, 1
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        s += term if k % 2 else -term
        if term < tol:
            break
        k += 1
    return min(max(2.0 * s, 0.0), 1.0)


def ks_test_standard_normal(samples) -> StatReport:
    """One-sample K-S test against N(0, 1) with the asymptotic p-value."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = len(x)
    if n < 10:
        raise ValueError("K-S test needs at least 10 samples")
    cdf = ndtr(x)
    i = np.arange(1, n + 1)
    d = max(float(np.max(i / n - cdf)), float(np.max(cdf - (i - 1) / n)))
    return StatReport("ks", d, kolmogorov_sf(math.sqrt(n) * d), n)


def morans_i(image) -> StatReport:
    """Moran's I with binary rook weights; two-sided normal-approximation p-value.

    The variance uses the normality assumption.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3 and img.shape[0] == 1:
        img = img[0]
    if img.ndim != 2:
        raise ValueError("Moran's I needs a single-channel 2D image")
    H, W = img.shape
    if H < 3 or W < 3:
        raise ValueError("Moran's I needs at least a 3x3 image")
    n = H * W
    z = img - img.mean()
    # each unordered neighbor pair appears twice in the symmetric weight sum
    cross = 2.0 * (np.sum(z[1:, :] * z[:-1, :]) + np.sum(z[:, 1:] * z[:, :-1]))
    s0 = 2.0 * (H * (W - 1) + W * (H - 1))
    ss = float(np.sum(z * z))
    if ss == 0.0:
        raise ValueError("Moran's I is undefined for a constant image")
    stat = (n / s0) * cross / ss
    deg = np.full((H, W), 4.0)
    deg[0, :] -= 1
    deg[-1, :] -= 1
    deg[:, 0] -= 1
    deg[:, -1] -= 1
    s1 = 2.0 * s0
    s2 = float(np.sum((2.0 * deg) ** 2))
    e = -1.0 / (n - 1)
    var = (n * n * s1 - n * s2 + 3.0 * s0 * s0) / ((n * n - 1.0) * s0 * s0) - e * e
    zscore = (stat - e) / math.sqrt(var)
    p = float(2.0 * ndtr(-abs(zscore)))
    return StatReport("morans_i", float(stat), min(p, 1.0), n)


def wasserstein2_1d(a, b) -> float:
    """2-Wasserstein distance between two empirical 1D distributions.

    Uses the quantile coupling. For equal sizes this is the RMS difference of
    the sorted samples; unequal sizes integrate over merged quantile levels.
    """
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty sample")
    if len(a) == len(b):
        return float(np.sqrt(np.mean((a - b) ** 2)))
    levels = np.union1d(np.arange(1, len(a) + 1) / len(a), np.arange(1, len(b) + 1) / len(b))
    levels[-1] = 1.0
    widths = np.diff(levels, prepend=0.0)
    ia = np.minimum(np.ceil(levels * len(a) - 1e-9).astype(np.int64) - 1, len(a) - 1)
    ib = np.minimum(np.ceil(levels * len(b) - 1e-9).astype(np.int64) - 1, len(b) - 1)
    return float(np.sqrt(np.sum(widths * (a[ia] - b[ib]) ** 2)))


def per_pixel_wasserstein(a, b) -> np.ndarray:
    """W2 between the per-pixel marginals of run stacks ``a`` and ``b`` (``(runs, ...)``)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1:] != b.shape[1:]:
        raise ValueError("run stacks must share the pixel shape")
    if a.shape[0] == b.shape[0]:
        d = np.sort(a, axis=0) - np.sort(b, axis=0)
        return np.sqrt(np.mean(d * d, axis=0))
    fa, fb = a.reshape(a.shape[0], -1), b.reshape(b.shape[0], -1)
    return np.array([wasserstein2_1d(fa[:, p], fb[:, p]) for p in range(fa.shape[1])]).reshape(a.shape[1:])


# -------------------------------------------------------------- experiments

def _batched_runs(fn, runs, batch, seed, tag):
    out = []
    done = 0
    k = 0
    while done < runs:
        m = min(batch, runs - done)
        out.append(fn(m, derive_seed(seed, STREAM_RUN, tag, k)))
        done += m
        k += 1
    return np.concatenate(out, axis=0)


def bridge_runs(prior, flow, runs: int, seed: int, method: str = "grid", batch: int = 4096) -> np.ndarray:
    """``runs`` independent warps of one fixed prior, shape ``(runs, *shape)``."""
    from .warp import build_record, warp_noise

    prior = check_noise(prior, ndim=2)[:1]
    record = build_record(flow, method)

    def one(m, s):
        return warp_noise(np.repeat(prior, m, axis=0), record, s).warped

    return _batched_runs(one, runs, batch, seed, 0)


def hiwyn_runs(prior, flow, N: int, runs: int, seed: int, eulerian: bool = False,
               max_doubles: int = 2 ** 24) -> np.ndarray:
    """``runs`` independent upsampling warps of one fixed prior."""
    from .hiwyn import hiwyn_owner, hiwyn_warp, hiwyn_warp_eulerian

    prior = check_noise(prior, ndim=2)[:1]
    owner = hiwyn_owner(flow, N)
    n = prior[0].size
    batch = max(1, min(runs, max_doubles // (n * N * N)))
    fn = hiwyn_warp_eulerian if eulerian else hiwyn_warp

    def one(m, s):
        return fn(np.repeat(prior, m, axis=0), flow, N, s, owner=owner).warped

    return _batched_runs(one, runs, batch, seed, N)


def convergence_experiment(prior, flow, levels=(2, 4, 8, 16, 64), runs: int = 20000, seed: int = 0,
                           self_distance: bool = True) -> dict:
    """Per-pixel W2 between the upsampling reference at each N and the grid bridge warp.

    Returns ``{"rows": [(N, mean, max), ...], "self": (mean, max) or None}``.
    The self row compares two independent sets of bridge-warp runs and marks
    the Monte-Carlo floor.
    """
    if runs < 2:
        raise ValueError("runs must be >= 2")
    flow = check_flow(flow)
    ref = bridge_runs(prior, flow, runs, derive_seed(seed, 0))
    rows = []
    for N in levels:
        w = per_pixel_wasserstein(hiwyn_runs(prior, flow, int(N), runs, derive_seed(seed, 1)), ref)
        rows.append((int(N), float(w.mean()), float(w.max())))
    self_row = None
    if self_distance:
        w = per_pixel_wasserstein(bridge_runs(prior, flow, runs, derive_seed(seed, 2)), ref)
        self_row = (float(w.mean()), float(w.max()))
    return {"rows": rows, "self": self_row}


def white_noise_experiment(flow, steps: int = 50, method: str = "grid", seed: int = 0) -> tuple[StatReport, StatReport]:
    """Warp fresh white noise ``steps`` times by ``flow`` and test the last frame."""
    from .core import make_prior_noise
    from .warp import warp_sequence

    flow = check_flow(flow)
    prior = make_prior_noise(flow.shape[:-1], 1, seed)
    if method in ("grid", "particle"):
        frame = warp_sequence(prior, [flow] * steps, method, seed)[-1]
    else:
        frame = prior
        for _ in range(steps):
            frame = warp_interpolated(frame, flow, method)
    return ks_test_standard_normal(frame), morans_i(frame[0])
