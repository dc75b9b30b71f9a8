# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled kernels. Must stay numerically in step with ``_pykernels``."""
import numpy as np

from cython.parallel cimport prange, parallel
from libc.math cimport log, cos, sqrt, floor, ceil
from libc.stdint cimport uint64_t, int64_t, int32_t
from libc.stdlib cimport malloc, free

cdef double EPS_T = 1e-12
cdef double MIN_AREA = 1e-12
cdef double TWO_PI = 6.283185307179586
cdef double INV_2_53 = 1.0 / 9007199254740992.0
cdef int MAXV = 32


cdef inline uint64_t splitmix64(uint64_t x) noexcept nogil:
    cdef uint64_t z = x + 0x9E3779B97F4A7C15ULL
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t lane_hash(uint64_t seed, uint64_t pixel, uint64_t channel) noexcept nogil:
    cdef uint64_t h = splitmix64(seed)
    h = splitmix64(h ^ pixel)
    return splitmix64(h ^ channel)


cdef inline double lane_normal(uint64_t lane, uint64_t draw) noexcept nogil:
    cdef uint64_t h1 = splitmix64(lane ^ draw)
    cdef uint64_t h2 = splitmix64(h1 ^ 0xD1B54A32D192ED03ULL)
    cdef double u1 = (<double>(h1 >> 11) + 0.5) * INV_2_53
    cdef double u2 = <double>(h2 >> 11) * INV_2_53
    return sqrt(-2.0 * log(u1)) * cos(TWO_PI * u2)


def normal_array(uint64_t seed, const int64_t[::1] pixel, const int64_t[::1] channel,
                 const int64_t[::1] draw):
    cdef Py_ssize_t n = pixel.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = lane_normal(lane_hash(seed, <uint64_t>pixel[i], <uint64_t>channel[i]),
                               <uint64_t>draw[i])
    return out


def prior_noise(uint64_t seed, Py_ssize_t n, Py_ssize_t channels):
    out = np.empty((channels, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t c, p
    with nogil:
        for c in range(channels):
            for p in range(n):
                o[c, p] = lane_normal(lane_hash(seed, <uint64_t>p, <uint64_t>c), 0)
    return out


# ---------------------------------------------------------------- bridge walk

cdef inline double next_time(double t, double a) noexcept nogil:
    """Bridge time after requesting ``a`` at time ``t``: clamped at 1, snapped near 1."""
    cdef double tn = t + a
    if tn > 1.0:
        tn = 1.0
    if (1.0 - tn) < EPS_T or (1.0 - t) < EPS_T:
        tn = 1.0
    return tn


def bridge_scatter(const double[:, ::1] prior, const int64_t[::1] offsets,
                   const double[::1] areas, const int32_t[::1] dests, uint64_t seed,
                   Py_ssize_t n_dest, int nthreads):
    """Walk every source's bridge over its record entries and scatter increments.

    Returns (unnormalized sums (C, n_dest), consumed time per destination,
    number of clamp events). Increments are computed in parallel over sources
    and summed into destinations sequentially in entry order, so the result
    does not depend on the thread count.
    """
    cdef Py_ssize_t C = prior.shape[0], n_src = prior.shape[1], n_ent = areas.shape[0]
    inc_arr = np.empty((C, n_ent), dtype=np.float64)
    acc_arr = np.zeros((C, n_dest), dtype=np.float64)
    consumed_arr = np.zeros(n_dest, dtype=np.float64)
    cdef double[:, ::1] inc = inc_arr
    cdef double[:, ::1] acc = acc_arr
    cdef double[::1] consumed = consumed_arr
    cdef Py_ssize_t s, e, ch, e0, e1
    cdef double t, q, c, tn, dt, rem, den, qn
    cdef uint64_t lane
    cdef Py_ssize_t clamps = 0

    for ch in range(C):
        for s in prange(n_src, nogil=True, num_threads=nthreads, schedule="static"):
            c = prior[ch, s]
            t = 0.0
            q = 0.0
            e0 = offsets[s]
            e1 = offsets[s + 1]
            lane = lane_hash(seed, <uint64_t>s, <uint64_t>ch)
            for e in range(e0, e1):
                tn = next_time(t, areas[e])
                dt = tn - t
                if dt <= 0.0:
                    inc[ch, e] = 0.0
                    continue
                if tn >= 1.0:
                    qn = c
                else:
                    rem = 1.0 - tn
                    den = 1.0 - t
                    qn = (rem / den) * q + (dt / den) * c + sqrt(dt * rem / den) * lane_normal(lane, <uint64_t>(e - e0))
                inc[ch, e] = qn - q
                q = qn
                t = tn

    with nogil:
        for s in range(n_src):
            t = 0.0
            for e in range(offsets[s], offsets[s + 1]):
                if t + areas[e] > 1.0 + EPS_T:
                    clamps += 1
                tn = next_time(t, areas[e])
                consumed[dests[e]] += tn - t
                t = tn
        for ch in range(C):
            for s in range(n_src):
                for e in range(offsets[s], offsets[s + 1]):
                    acc[ch, dests[e]] += inc[ch, e]
    return acc_arr, consumed_arr, int(clamps)


# ------------------------------------------------------------------ geometry

cdef inline void axis_lerp(double p, Py_ssize_t D, Py_ssize_t* i0, Py_ssize_t* i1,
                           double* f) noexcept nogil:
    cdef double s
    cdef Py_ssize_t b
    if p < 0.5:
        p = 0.5
    if p > D - 0.5:
        p = D - 0.5
    s = p - 0.5
    b = <Py_ssize_t>floor(s)
    if b > D - 2:
        b = D - 2
    if b < 0:
        b = 0
    f[0] = s - b
    i0[0] = b
    i1[0] = b + 1 if b + 1 < D else D - 1


cdef inline void flow_at(const double[:, :, ::1] flow, Py_ssize_t H, Py_ssize_t W,
                         double p0, double p1, double* out) noexcept nogil:
    cdef Py_ssize_t a0, a1, b0, b1
    cdef double f0, f1, w00, w01, w10, w11
    cdef int k
    axis_lerp(p0, H, &a0, &a1, &f0)
    axis_lerp(p1, W, &b0, &b1, &f1)
    w00 = (1.0 - f0) * (1.0 - f1)
    w01 = (1.0 - f0) * f1
    w10 = f0 * (1.0 - f1)
    w11 = f0 * f1
    for k in range(2):
        out[k] = (w00 * flow[a0, b0, k] + w01 * flow[a0, b1, k]
                  + w10 * flow[a1, b0, k] + w11 * flow[a1, b1, k])


cdef double OCT0[8]
cdef double OCT1[8]
OCT0[:] = [0.0, 0.5, 1.0, 1.0, 1.0, 0.5, 0.0, 0.0]
OCT1[:] = [0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0, 0.5]


cdef inline void octagon(const double[:, :, ::1] flow, Py_ssize_t H, Py_ssize_t W,
                         Py_ssize_t i, Py_ssize_t j, double* xs, double* ys) noexcept nogil:
    # vertex offsets take only the values 0, 0.5 and 1 per axis, so the
    # interpolation stencils are looked up once per axis and reused
    cdef int k, r0, r1
    cdef Py_ssize_t a0[3]
    cdef Py_ssize_t a1[3]
    cdef Py_ssize_t b0[3]
    cdef Py_ssize_t b1[3]
    cdef double f0[3]
    cdef double f1[3]
    cdef double w00, w01, w10, w11
    for k in range(3):
        axis_lerp(i + 0.5 * k, H, &a0[k], &a1[k], &f0[k])
        axis_lerp(j + 0.5 * k, W, &b0[k], &b1[k], &f1[k])
    for k in range(8):
        r0 = <int>(OCT0[k] * 2.0)
        r1 = <int>(OCT1[k] * 2.0)
        w00 = (1.0 - f0[r0]) * (1.0 - f1[r1])
        w01 = (1.0 - f0[r0]) * f1[r1]
        w10 = f0[r0] * (1.0 - f1[r1])
        w11 = f0[r0] * f1[r1]
        xs[k] = (i + OCT0[k]) + (w00 * flow[a0[r0], b0[r1], 0] + w01 * flow[a0[r0], b1[r1], 0]
                                 + w10 * flow[a1[r0], b0[r1], 0] + w11 * flow[a1[r0], b1[r1], 0])
        ys[k] = (j + OCT1[k]) + (w00 * flow[a0[r0], b0[r1], 1] + w01 * flow[a0[r0], b1[r1], 1]
                                 + w10 * flow[a1[r0], b0[r1], 1] + w11 * flow[a1[r0], b1[r1], 1])


cdef inline void cell_range(double* v, int n, Py_ssize_t D, Py_ssize_t* lo,
                            Py_ssize_t* hi) noexcept nogil:
    cdef double mn = v[0], mx = v[0]
    cdef int k
    for k in range(1, n):
        if v[k] < mn:
            mn = v[k]
        if v[k] > mx:
            mx = v[k]
    cdef double a = floor(mn), b = ceil(mx) - 1.0
    if a < 0.0:
        a = 0.0
    if a > D:
        a = D
    if b > D - 1:
        b = D - 1
    if b < -1.0:
        b = -1.0
    lo[0] = <Py_ssize_t>a
    hi[0] = <Py_ssize_t>b
    if b < a:
        hi[0] = lo[0] - 1


cdef inline int clip_half(double* xs, double* ys, int n, int axis, double bound,
                          int keep_greater, double* ox, double* oy) noexcept nogil:
    """One Sutherland-Hodgman pass against an axis-aligned half plane."""
    cdef int m = 0, k, prev, pin, cin
    cdef double pv, cv, t
    if n == 0:
        return 0
    prev = n - 1
    for k in range(n):
        if axis == 0:
            pv = xs[prev]
            cv = xs[k]
        else:
            pv = ys[prev]
            cv = ys[k]
        if keep_greater:
            pin = pv >= bound
            cin = cv >= bound
        else:
            pin = pv <= bound
            cin = cv <= bound
        if cin != pin:
            t = (bound - pv) / (cv - pv)
            if axis == 0:
                ox[m] = bound
                oy[m] = ys[prev] + t * (ys[k] - ys[prev])
            else:
                ox[m] = xs[prev] + t * (xs[k] - xs[prev])
                oy[m] = bound
            m += 1
        if cin:
            ox[m] = xs[k]
            oy[m] = ys[k]
            m += 1
        prev = k
    return m


cdef inline double shoelace(double* xs, double* ys, int n, double ox, double oy) noexcept nogil:
    cdef double s = 0.0
    cdef int k, prev
    if n < 3:
        return 0.0
    prev = n - 1
    for k in range(n):
        s += (xs[prev] - ox) * (ys[k] - oy) - (xs[k] - ox) * (ys[prev] - oy)
        prev = k
    if s < 0.0:
        s = -s
    return 0.5 * s


def octagons(const double[:, :, ::1] flow):
    cdef Py_ssize_t H = flow.shape[0], W = flow.shape[1], i, j
    out = np.empty((H * W, 8, 2), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef double xs[8]
    cdef double ys[8]
    cdef int k
    with nogil:
        for i in range(H):
            for j in range(W):
                octagon(flow, H, W, i, j, xs, ys)
                for k in range(8):
                    o[i * W + j, k, 0] = xs[k]
                    o[i * W + j, k, 1] = ys[k]
    return out


def clip_area(const double[:, ::1] poly, Py_ssize_t u, Py_ssize_t v):
    """Clip ``poly`` to cell (u, v); returns (clipped vertices, area)."""
    cdef int n = poly.shape[0], k, m
    if n > 8:
        raise ValueError("compiled clip supports at most 8 vertices")
    cdef double xs[32]
    cdef double ys[32]
    cdef double ax[32]
    cdef double ay[32]
    for k in range(n):
        xs[k] = poly[k, 0]
        ys[k] = poly[k, 1]
    m = clip_half(xs, ys, n, 0, <double>u, 1, ax, ay)
    m = clip_half(ax, ay, m, 0, <double>(u + 1), 0, xs, ys)
    m = clip_half(xs, ys, m, 1, <double>v, 1, ax, ay)
    m = clip_half(ax, ay, m, 1, <double>(v + 1), 0, xs, ys)
    out = np.empty((m, 2), dtype=np.float64)
    for k in range(m):
        out[k, 0] = xs[k]
        out[k, 1] = ys[k]
    return out, shoelace(xs, ys, m, <double>u, <double>v)


def grid_partition(const double[:, :, ::1] flow, int nthreads):
    cdef Py_ssize_t H = flow.shape[0], W = flow.shape[1], n = H * W
    cdef Py_ssize_t d, u, v, u0, u1, v0, v1, slot, total, s, e
    cdef double* buf
    cdef int m1, m2, m3, m4

    slot_start_arr = np.zeros(n + 1, dtype=np.int64)
    cdef int64_t[::1] slot_start = slot_start_arr

    # pass 1: candidate cell counts from the bounding box
    with nogil, parallel(num_threads=nthreads):
        buf = <double*>malloc(16 * sizeof(double))
        for d in prange(n, schedule="static"):
            octagon(flow, H, W, d // W, d % W, buf, buf + 8)
            u0 = 0
            u1 = -1
            v0 = 0
            v1 = -1
            cell_range(buf, 8, H, &u0, &u1)
            cell_range(buf + 8, 8, W, &v0, &v1)
            if u1 >= u0 and v1 >= v0:
                slot_start[d + 1] = (u1 - u0 + 1) * (v1 - v0 + 1)
        free(buf)
    with nogil:
        for d in range(n):
            slot_start[d + 1] += slot_start[d]
    total = slot_start[n]

    slot_area_arr = np.empty(total, dtype=np.float64)
    slot_src_arr = np.empty(total, dtype=np.int32)
    cdef double[::1] slot_area = slot_area_arr
    cdef int32_t[::1] slot_src = slot_src_arr

    # pass 2: clip against every candidate cell; strip clip along axis 0 first
    with nogil, parallel(num_threads=nthreads):
        buf = <double*>malloc((16 + 6 * MAXV) * sizeof(double))
        for d in prange(n, schedule="static"):
            octagon(flow, H, W, d // W, d % W, buf, buf + 8)
            u0 = 0
            u1 = -1
            v0 = 0
            v1 = -1
            cell_range(buf, 8, H, &u0, &u1)
            cell_range(buf + 8, 8, W, &v0, &v1)
            slot = slot_start[d]
            for u in range(u0, u1 + 1):
                m1 = clip_half(buf, buf + 8, 8, 0, <double>u, 1, buf + 16, buf + 16 + MAXV)
                m2 = clip_half(buf + 16, buf + 16 + MAXV, m1, 0, <double>(u + 1), 0,
                               buf + 16 + 2 * MAXV, buf + 16 + 3 * MAXV)
                for v in range(v0, v1 + 1):
                    m3 = clip_half(buf + 16 + 2 * MAXV, buf + 16 + 3 * MAXV, m2, 1, <double>v, 1,
                                   buf + 16, buf + 16 + MAXV)
                    m4 = clip_half(buf + 16, buf + 16 + MAXV, m3, 1, <double>(v + 1), 0,
                                   buf + 16 + 4 * MAXV, buf + 16 + 5 * MAXV)
                    slot_area[slot] = shoelace(buf + 16 + 4 * MAXV, buf + 16 + 5 * MAXV, m4,
                                               <double>u, <double>v)
                    slot_src[slot] = <int32_t>(u * W + v)
                    slot = slot + 1
        free(buf)

    # pass 3: stable counting sort by source, dropping negligible areas
    offsets_arr = np.zeros(n + 1, dtype=np.int64)
    cdef int64_t[::1] offsets = offsets_arr
    with nogil:
        for e in range(total):
            if slot_area[e] >= MIN_AREA:
                offsets[slot_src[e] + 1] += 1
        for s in range(n):
            offsets[s + 1] += offsets[s]
    n_ent = offsets[n]
    areas_arr = np.empty(n_ent, dtype=np.float64)
    dests_arr = np.empty(n_ent, dtype=np.int32)
    cursor_arr = offsets_arr[:n].copy()
    cdef double[::1] areas = areas_arr
    cdef int32_t[::1] dests = dests_arr
    cdef int64_t[::1] cursor = cursor_arr
    with nogil:
        for d in range(n):
            for e in range(slot_start[d], slot_start[d + 1]):
                if slot_area[e] >= MIN_AREA:
                    s = slot_src[e]
                    areas[cursor[s]] = slot_area[e]
                    dests[cursor[s]] = <int32_t>d
                    cursor[s] += 1
    return offsets_arr, areas_arr, dests_arr


# ------------------------------------------------------------------ particles

def particle_partition(const double[:, ::1] positions, const int64_t[::1] shape, int nthreads):
    """Kernel-weighted scatter of particles onto cells (1 to 3 axes), normalized per cell."""
    cdef Py_ssize_t n = positions.shape[0], dim = positions.shape[1]
    cdef Py_ssize_t K = 1 << dim, p, k, ax, cell, n_cells = 1, e, c, e0, e1
    cdef double w, tot, x
    cdef int inside
    cdef Py_ssize_t* idx
    cdef double* fr
    if dim < 1 or dim > 3:
        raise ValueError("particle partition supports 1 to 3 axes")
    for ax in range(dim):
        n_cells *= shape[ax]

    slot_w_arr = np.zeros(n * K, dtype=np.float64)
    slot_cell_arr = np.full(n * K, -1, dtype=np.int32)
    cdef double[::1] slot_w = slot_w_arr
    cdef int32_t[::1] slot_cell = slot_cell_arr

    with nogil, parallel(num_threads=nthreads):
        idx = <Py_ssize_t*>malloc(6 * sizeof(Py_ssize_t))
        fr = <double*>malloc(3 * sizeof(double))
        for p in prange(n, schedule="static"):
            inside = 1
            for ax in range(dim):
                x = positions[p, ax]
                if x < 0.0 or x > <double>shape[ax]:
                    inside = 0
            if inside:
                for ax in range(dim):
                    axis_lerp(positions[p, ax], shape[ax], idx + ax, idx + 3 + ax, fr + ax)
                for k in range(K):
                    w = 1.0
                    cell = 0
                    for ax in range(dim):
                        if (k >> (dim - 1 - ax)) & 1:
                            w = w * fr[ax]
                            cell = cell * shape[ax] + idx[3 + ax]
                        else:
                            w = w * (1.0 - fr[ax])
                            cell = cell * shape[ax] + idx[ax]
                    if w >= MIN_AREA:
                        slot_w[p * K + k] = w
                        slot_cell[p * K + k] = <int32_t>cell
        free(idx)
        free(fr)

    offsets_arr = np.zeros(n_cells + 1, dtype=np.int64)
    cdef int64_t[::1] offsets = offsets_arr
    with nogil:
        for e in range(n * K):
            if slot_cell[e] >= 0:
                offsets[slot_cell[e] + 1] += 1
        for c in range(n_cells):
            offsets[c + 1] += offsets[c]
    n_ent = offsets[n_cells]
    areas_arr = np.empty(n_ent, dtype=np.float64)
    dests_arr = np.empty(n_ent, dtype=np.int32)
    cursor_arr = offsets_arr[:n_cells].copy()
    cdef double[::1] areas = areas_arr
    cdef int32_t[::1] dests = dests_arr
    cdef int64_t[::1] cursor = cursor_arr
    with nogil:
        for e in range(n * K):
            c = slot_cell[e]
            if c >= 0:
                areas[cursor[c]] = slot_w[e]
                dests[cursor[c]] = <int32_t>(e // K)
                cursor[c] += 1

    for c in prange(n_cells, nogil=True, num_threads=nthreads, schedule="static"):
        e0 = offsets[c]
        e1 = offsets[c + 1]
        tot = 0.0
        for e in range(e0, e1):
            tot = tot + areas[e]
        for e in range(e0, e1):
            areas[e] = areas[e] / tot
    return offsets_arr, areas_arr, dests_arr


# --------------------------------------------------------------------- HIWYN

def upsample_prefix(const double[:, ::1] prior, Py_ssize_t N, uint64_t seed, int nthreads):
    """Prefix sums of the upsampled subimages, shape (C, n, N*N); last entry pinned to c."""
    cdef Py_ssize_t C = prior.shape[0], n = prior.shape[1], n2 = N * N, ch, s, k
    out = np.empty((C, n, n2), dtype=np.float64)
    cdef double[:, :, ::1] H = out
    cdef double c, S, run, nn = <double>n2, dN = <double>N
    cdef uint64_t lane
    for ch in range(C):
        for s in prange(n, nogil=True, num_threads=nthreads, schedule="static"):
            lane = lane_hash(seed, <uint64_t>s, <uint64_t>ch)
            c = prior[ch, s]
            S = 0.0
            for k in range(n2):
                H[ch, s, k] = lane_normal(lane, <uint64_t>k)
                S = S + H[ch, s, k]
            run = 0.0
            for k in range(n2):
                run = run + (c / nn + (H[ch, s, k] - S / nn) / dN)
                H[ch, s, k] = run
            H[ch, s, n2 - 1] = c
    return out


cdef inline int point_in_polygon(double* xs, double* ys, int n, double px, double py) noexcept nogil:
    cdef int inside = 0, k, prev = n - 1
    for k in range(n):
        if ((ys[k] > py) != (ys[prev] > py)) and (
                px < (xs[prev] - xs[k]) * (py - ys[k]) / (ys[prev] - ys[k]) + xs[k]):
            inside = 1 - inside
        prev = k
    return inside


def subpixel_owner(const double[:, :, ::1] flow, Py_ssize_t N):
    """Assign each subpixel center to the lowest-index destination octagon covering it."""
    cdef Py_ssize_t H = flow.shape[0], W = flow.shape[1], n = H * W, n2 = N * N
    cdef Py_ssize_t d, m0, m1, lo0, hi0, lo1, hi1, s, k
    cdef double xs[8]
    cdef double ys[8]
    cdef double mn0, mx0, mn1, mx1, px, py, a, b
    cdef int q
    out = np.full((n, n2), -1, dtype=np.int32)
    cdef int32_t[:, ::1] owner = out
    with nogil:
        for d in range(n):
            octagon(flow, H, W, d // W, d % W, xs, ys)
            mn0 = xs[0]
            mx0 = xs[0]
            mn1 = ys[0]
            mx1 = ys[0]
            for q in range(1, 8):
                if xs[q] < mn0:
                    mn0 = xs[q]
                if xs[q] > mx0:
                    mx0 = xs[q]
                if ys[q] < mn1:
                    mn1 = ys[q]
                if ys[q] > mx1:
                    mx1 = ys[q]
            a = ceil(mn0 * N - 0.5)
            b = floor(mx0 * N - 0.5)
            if a < 0.0:
                a = 0.0
            if b > H * N - 1:
                b = H * N - 1
            if b < a or a > H * N - 1 or b < 0.0:
                continue
            lo0 = <Py_ssize_t>a
            hi0 = <Py_ssize_t>b
            a = ceil(mn1 * N - 0.5)
            b = floor(mx1 * N - 0.5)
            if a < 0.0:
                a = 0.0
            if b > W * N - 1:
                b = W * N - 1
            if b < a or a > W * N - 1 or b < 0.0:
                continue
            lo1 = <Py_ssize_t>a
            hi1 = <Py_ssize_t>b
            for m0 in range(lo0, hi0 + 1):
                px = (m0 + 0.5) / N
                for m1 in range(lo1, hi1 + 1):
                    s = (m0 // N) * W + m1 // N
                    k = (m0 % N) * N + m1 % N
                    if owner[s, k] >= 0:
                        continue
                    py = (m1 + 0.5) / N
                    if point_in_polygon(xs, ys, 8, px, py):
                        owner[s, k] = <int32_t>d
    return out


def hiwyn_gather(const double[:, :, ::1] H, const int32_t[:, ::1] owner,
                 const double[:, :, ::1] flow, int nthreads):
    """Lagrangian gather: each destination sums runs of the subpixels it owns."""
    cdef Py_ssize_t C = H.shape[0], n = H.shape[1], n2 = H.shape[2]
    cdef Py_ssize_t Hh = flow.shape[0], W = flow.shape[1]
    cdef Py_ssize_t d, u, v, u0, u1, v0, v1, s, k, start, ch, cnt
    cdef double* buf
    cdef double lo_val
    sums_arr = np.zeros((C, n), dtype=np.float64)
    counts_arr = np.zeros(n, dtype=np.int64)
    cdef double[:, ::1] sums = sums_arr
    cdef int64_t[::1] counts = counts_arr
    with nogil, parallel(num_threads=nthreads):
      buf = <double*>malloc(16 * sizeof(double))
      for d in prange(n, schedule="dynamic"):
        octagon(flow, Hh, W, d // W, d % W, buf, buf + 8)
        u0 = 0
        u1 = -1
        v0 = 0
        v1 = -1
        cell_range(buf, 8, Hh, &u0, &u1)
        cell_range(buf + 8, 8, W, &v0, &v1)
        cnt = 0
        for u in range(u0, u1 + 1):
            for v in range(v0, v1 + 1):
                s = u * W + v
                k = 0
                while k < n2:
                    if owner[s, k] != d:
                        k = k + 1
                        continue
                    start = k
                    while k < n2 and owner[s, k] == d:
                        k = k + 1
                    cnt = cnt + (k - start)
                    for ch in range(C):
                        if start > 0:
                            lo_val = H[ch, s, start - 1]
                        else:
                            lo_val = 0.0
                        sums[ch, d] += H[ch, s, k - 1] - lo_val
        counts[d] = cnt
      free(buf)
    return sums_arr, counts_arr


def hiwyn_scatter(const double[:, :, ::1] H, const int32_t[:, ::1] owner):
    """Eulerian scatter: consecutive prefix-sum segments go to overlapping destinations."""
    cdef Py_ssize_t C = H.shape[0], n = H.shape[1], n2 = H.shape[2]
    cdef Py_ssize_t s, k, m, i, j, o, ch, nd, pos
    cdef int32_t key
    cdef int64_t ck
    sums_arr = np.zeros((C, n), dtype=np.float64)
    counts_arr = np.zeros(n, dtype=np.int64)
    dl_arr = np.empty(n2, dtype=np.int32)
    cl_arr = np.empty(n2, dtype=np.int64)
    cdef double[:, ::1] sums = sums_arr
    cdef int64_t[::1] counts = counts_arr
    cdef int32_t[::1] dl = dl_arr
    cdef int64_t[::1] cl = cl_arr
    cdef double lo_val
    with nogil:
        for s in range(n):
            nd = 0
            for k in range(n2):
                o = owner[s, k]
                if o < 0:
                    continue
                for m in range(nd):
                    if dl[m] == o:
                        cl[m] += 1
                        break
                else:
                    dl[nd] = <int32_t>o
                    cl[nd] = 1
                    nd = nd + 1
            # order overlaps by destination index
            for i in range(1, nd):
                key = dl[i]
                ck = cl[i]
                j = i - 1
                while j >= 0 and dl[j] > key:
                    dl[j + 1] = dl[j]
                    cl[j + 1] = cl[j]
                    j = j - 1
                dl[j + 1] = key
                cl[j + 1] = ck
            pos = 0
            for m in range(nd):
                for ch in range(C):
                    if pos > 0:
                        lo_val = H[ch, s, pos - 1]
                    else:
                        lo_val = 0.0
                    sums[ch, dl[m]] += H[ch, s, pos + cl[m] - 1] - lo_val
                counts[dl[m]] += cl[m]
                pos = pos + cl[m]
    return sums_arr, counts_arr
