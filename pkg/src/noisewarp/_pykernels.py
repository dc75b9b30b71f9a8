"""Pure-Python/numpy fallback for ``_kernels``.

Same signatures, same arithmetic order. Only the transcendental calls inside
the Gaussian draws (numpy vs libm ``log``/``cos``) may differ in the last ulp.
"""
import numpy as np

EPS_T = 1e-12
MIN_AREA = 1e-12
TWO_PI = 6.283185307179586
INV_2_53 = 1.0 / 9007199254740992.0

_U = np.uint64
_GOLDEN = _U(0x9E3779B97F4A7C15)
_M1 = _U(0xBF58476D1CE4E5B9)
_M2 = _U(0x94D049BB133111EB)
_SECOND = _U(0xD1B54A32D192ED03)

OCT0 = np.array([0.0, 0.5, 1.0, 1.0, 1.0, 0.5, 0.0, 0.0])
OCT1 = np.array([0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0, 0.5])


def _as_u64(x):
    return np.asarray(x).astype(np.int64).view(np.uint64) if np.asarray(x).dtype != np.uint64 \
        else np.asarray(x)


def _splitmix(x):
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> _U(30))) * _M1
        z = (z ^ (z >> _U(27))) * _M2
    return z ^ (z >> _U(31))


def _lane(seed, pixel, channel):
    h = _splitmix(np.asarray(_U(seed)))
    h = _splitmix(h ^ _as_u64(pixel))
    return _splitmix(h ^ _as_u64(channel))


def _lane_normal(lane, draw):
    h1 = _splitmix(lane ^ _as_u64(draw))
    h2 = _splitmix(h1 ^ _SECOND)
    u1 = ((h1 >> _U(11)).astype(np.float64) + 0.5) * INV_2_53
    u2 = (h2 >> _U(11)).astype(np.float64) * INV_2_53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(TWO_PI * u2)


def normal_array(seed, pixel, channel, draw):
    pixel = np.asarray(pixel, dtype=np.int64)
    if pixel.size == 0:
        return np.empty(0)
    return np.asarray(_lane_normal(_lane(seed, pixel, channel), draw), dtype=np.float64)


def prior_noise(seed, n, channels):
    pix = np.arange(n, dtype=np.int64)
    out = np.empty((channels, n))
    for c in range(channels):
        out[c] = _lane_normal(_lane(seed, pix, np.full(n, c, dtype=np.int64)), np.zeros(n, np.int64))
    return out


def bridge_scatter(prior, offsets, areas, dests, seed, n_dest, nthreads=1):
    prior = np.asarray(prior, dtype=np.float64)
    C, n_src = prior.shape
    counts = np.diff(offsets)
    n_ent = len(areas)
    used = np.empty(n_ent)
    tnew = np.empty(n_ent)
    clamps = 0
    t = np.zeros(n_src)
    kmax = int(counts.max()) if n_src else 0
    for k in range(kmax):
        act = np.nonzero(counts > k)[0]
        e = offsets[act] + k
        tk = t[act]
        req = tk + areas[e]
        clamps += int(np.count_nonzero(req > 1.0 + EPS_T))
        req = np.where(req > 1.0, 1.0, req)
        tn = np.where(((1.0 - req) < EPS_T) | ((1.0 - tk) < EPS_T), 1.0, req)
        used[e] = tn - tk
        tnew[e] = tn
        t[act] = tn

    inc = np.empty((C, n_ent))
    src = np.arange(n_src, dtype=np.int64)
    for ch in range(C):
        c_all = prior[ch]
        lanes = _lane(seed, src, np.full(n_src, ch, dtype=np.int64))
        t = np.zeros(n_src)
        q = np.zeros(n_src)
        for k in range(kmax):
            act = np.nonzero(counts > k)[0]
            e = offsets[act] + k
            dt = used[e]
            live = dt > 0.0
            inc[ch, e[~live]] = 0.0
            act, e, dt = act[live], e[live], dt[live]
            tn = tnew[e]
            c = c_all[act]
            qk = q[act]
            tk = t[act]
            term = tn >= 1.0
            qn = np.empty(len(act))
            qn[term] = c[term]
            o = ~term
            if np.any(o):
                rem = 1.0 - tn[o]
                den = 1.0 - tk[o]
                z = _lane_normal(lanes[act[o]], np.full(np.count_nonzero(o), k, dtype=np.int64))
                qn[o] = (rem / den) * qk[o] + (dt[o] / den) * c[o] + np.sqrt(dt[o] * rem / den) * z
            inc[ch, e] = qn - qk
            q[act] = qn
            t[act] = tn

    consumed = np.zeros(n_dest)
    np.add.at(consumed, dests, used)
    acc = np.zeros((C, n_dest))
    for ch in range(C):
        np.add.at(acc[ch], dests, inc[ch])
    return acc, consumed, clamps


# ------------------------------------------------------------------ geometry

def axis_lerp(p, D):
    p = np.clip(np.asarray(p, dtype=np.float64), 0.5, D - 0.5)
    s = p - 0.5
    b = np.floor(s).astype(np.int64)
    b = np.minimum(b, D - 2)
    b = np.maximum(b, 0)
    f = s - b
    i1 = np.where(b + 1 < D, b + 1, D - 1)
    return b, i1, f


def flow_at(flow, p0, p1):
    H, W = flow.shape[:2]
    a0, a1, f0 = axis_lerp(p0, H)
    b0, b1, f1 = axis_lerp(p1, W)
    w00 = (1.0 - f0) * (1.0 - f1)
    w01 = (1.0 - f0) * f1
    w10 = f0 * (1.0 - f1)
    w11 = f0 * f1
    return (w00[..., None] * flow[a0, b0] + w01[..., None] * flow[a0, b1]
            + w10[..., None] * flow[a1, b0] + w11[..., None] * flow[a1, b1])


def octagons(flow):
    H, W = flow.shape[:2]
    ii, jj = np.meshgrid(np.arange(H, dtype=np.float64), np.arange(W, dtype=np.float64), indexing="ij")
    p0 = ii.reshape(-1, 1) + OCT0
    p1 = jj.reshape(-1, 1) + OCT1
    disp = flow_at(flow, p0, p1)
    return np.stack([p0 + disp[..., 0], p1 + disp[..., 1]], axis=-1)


def clip_half(pts, axis, bound, keep_greater):
    out = []
    n = len(pts)
    if n == 0:
        return out
    prev = pts[-1]
    for cur in pts:
        pv, cv = prev[axis], cur[axis]
        if keep_greater:
            pin, cin = pv >= bound, cv >= bound
        else:
            pin, cin = pv <= bound, cv <= bound
        if cin != pin:
            t = (bound - pv) / (cv - pv)
            if axis == 0:
                out.append((bound, prev[1] + t * (cur[1] - prev[1])))
            else:
                out.append((prev[0] + t * (cur[0] - prev[0]), bound))
        if cin:
            out.append(cur)
        prev = cur
    return out


def shoelace(pts, ox, oy):
    if len(pts) < 3:
        return 0.0
    s = 0.0
    prev = pts[-1]
    for cur in pts:
        s += (prev[0] - ox) * (cur[1] - oy) - (cur[0] - ox) * (prev[1] - oy)
        prev = cur
    return 0.5 * abs(s)


def clip_area(poly, u, v):
    pts = [(float(x), float(y)) for x, y in np.asarray(poly, dtype=np.float64)]
    pts = clip_half(pts, 0, float(u), True)
    pts = clip_half(pts, 0, float(u + 1), False)
    pts = clip_half(pts, 1, float(v), True)
    pts = clip_half(pts, 1, float(v + 1), False)
    return np.asarray(pts, dtype=np.float64).reshape(-1, 2), shoelace(pts, float(u), float(v))


def cell_range(vals, D):
    a = np.floor(min(vals))
    b = np.ceil(max(vals)) - 1.0
    a = min(max(a, 0.0), float(D))
    b = max(min(b, float(D - 1)), -1.0)
    if b < a:
        return int(a), int(a) - 1
    return int(a), int(b)


def grid_partition(flow, nthreads=1):
    H, W = flow.shape[:2]
    n = H * W
    octs = octagons(flow)
    per_src = [[] for _ in range(n)]
    for d in range(n):
        pts = [(float(x), float(y)) for x, y in octs[d]]
        u0, u1 = cell_range([p[0] for p in pts], H)
        v0, v1 = cell_range([p[1] for p in pts], W)
        for u in range(u0, u1 + 1):
            strip = clip_half(clip_half(pts, 0, float(u), True), 0, float(u + 1), False)
            for v in range(v0, v1 + 1):
                piece = clip_half(clip_half(strip, 1, float(v), True), 1, float(v + 1), False)
                a = shoelace(piece, float(u), float(v))
                if a >= MIN_AREA:
                    per_src[u * W + v].append((a, d))
    return _to_csr(per_src)


def _to_csr(per_src):
    offsets = np.zeros(len(per_src) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(x) for x in per_src])
    areas = np.array([a for lst in per_src for a, _ in lst], dtype=np.float64)
    dests = np.array([d for lst in per_src for _, d in lst], dtype=np.int32)
    return offsets, areas, dests


# ------------------------------------------------------------------ particles

def particle_partition(positions, shape, nthreads=1):
    positions = np.asarray(positions, dtype=np.float64)
    shape = [int(s) for s in shape]
    n, dim = positions.shape
    K = 1 << dim
    n_cells = int(np.prod(shape))
    inside = np.all((positions >= 0.0) & (positions <= np.asarray(shape, dtype=np.float64)), axis=1)
    lo, hi, fr = [], [], []
    for ax in range(dim):
        b, i1, f = axis_lerp(positions[:, ax], shape[ax])
        lo.append(b)
        hi.append(i1)
        fr.append(f)
    w = np.empty((n, K))
    cell = np.empty((n, K), dtype=np.int64)
    for k in range(K):
        wk = np.ones(n)
        ck = np.zeros(n, dtype=np.int64)
        for ax in range(dim):
            if (k >> (dim - 1 - ax)) & 1:
                wk = wk * fr[ax]
                ck = ck * shape[ax] + hi[ax]
            else:
                wk = wk * (1.0 - fr[ax])
                ck = ck * shape[ax] + lo[ax]
        w[:, k] = wk
        cell[:, k] = ck
    keep = (w >= MIN_AREA) & inside[:, None]
    w = w.reshape(-1)
    cell = cell.reshape(-1)
    dest = np.repeat(np.arange(n, dtype=np.int64), K)
    keep = keep.reshape(-1)
    w, cell, dest = w[keep], cell[keep], dest[keep]
    order = np.argsort(cell, kind="stable")
    w, cell, dest = w[order], cell[order], dest[order]
    offsets = np.zeros(n_cells + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(np.bincount(cell, minlength=n_cells))
    tot = np.zeros(n_cells)
    np.add.at(tot, cell, w)
    areas = w / tot[cell]
    return offsets, areas, dest.astype(np.int32)


# --------------------------------------------------------------------- HIWYN

def upsample_prefix(prior, N, seed, nthreads=1):
    prior = np.asarray(prior, dtype=np.float64)
    C, n = prior.shape
    n2 = N * N
    nn = float(n2)
    dN = float(N)
    out = np.empty((C, n, n2))
    pix = np.repeat(np.arange(n, dtype=np.int64), n2)
    draw = np.tile(np.arange(n2, dtype=np.int64), n)
    for ch in range(C):
        Z = _lane_normal(_lane(seed, pix, np.full(pix.shape, ch, dtype=np.int64)), draw).reshape(n, n2)
        S = np.cumsum(Z, axis=1)[:, -1]
        c = prior[ch][:, None]
        X = c / nn + (Z - (S / nn)[:, None]) / dN
        out[ch] = np.cumsum(X, axis=1)
        out[ch, :, -1] = prior[ch]
    return out


def point_in_polygon(poly, px, py):
    xs, ys = poly[:, 0], poly[:, 1]
    inside = np.zeros(np.shape(px), dtype=bool)
    prev = len(xs) - 1
    for k in range(len(xs)):
        with np.errstate(divide="ignore", invalid="ignore"):
            cross = ((ys[k] > py) != (ys[prev] > py)) & (
                px < (xs[prev] - xs[k]) * (py - ys[k]) / (ys[prev] - ys[k]) + xs[k])
        inside ^= cross
        prev = k
    return inside


def subpixel_owner(flow, N):
    H, W = flow.shape[:2]
    n = H * W
    owner = np.full((n, N * N), -1, dtype=np.int32)
    octs = octagons(flow)
    for d in range(n):
        poly = octs[d]
        a0 = max(np.ceil(poly[:, 0].min() * N - 0.5), 0.0)
        b0 = min(np.floor(poly[:, 0].max() * N - 0.5), H * N - 1.0)
        a1 = max(np.ceil(poly[:, 1].min() * N - 0.5), 0.0)
        b1 = min(np.floor(poly[:, 1].max() * N - 0.5), W * N - 1.0)
        if b0 < a0 or b1 < a1 or a0 > H * N - 1 or a1 > W * N - 1 or b0 < 0 or b1 < 0:
            continue
        m0, m1 = np.meshgrid(np.arange(int(a0), int(b0) + 1), np.arange(int(a1), int(b1) + 1),
                             indexing="ij")
        m0 = m0.ravel()
        m1 = m1.ravel()
        s = (m0 // N) * W + m1 // N
        k = (m0 % N) * N + m1 % N
        free = owner[s, k] < 0
        px = (m0 + 0.5) / N
        py = (m1 + 0.5) / N
        hit = free & point_in_polygon(poly, px, py)
        owner[s[hit], k[hit]] = d
    return owner


def _runs(row, d):
    mask = np.concatenate([[False], row == d, [False]])
    edges = np.flatnonzero(mask[1:] != mask[:-1])
    return edges[0::2], edges[1::2]


def hiwyn_gather(H, owner, flow, nthreads=1):
    C, n, n2 = H.shape
    Hh, W = flow.shape[:2]
    sums = np.zeros((C, n))
    counts = np.zeros(n, dtype=np.int64)
    octs = octagons(flow)
    for d in range(n):
        u0, u1 = cell_range(list(octs[d, :, 0]), Hh)
        v0, v1 = cell_range(list(octs[d, :, 1]), W)
        cnt = 0
        for u in range(u0, u1 + 1):
            for v in range(v0, v1 + 1):
                s = u * W + v
                starts, stops = _runs(owner[s], d)
                for a, b in zip(starts, stops):
                    cnt += b - a
                    for ch in range(C):
                        lo = H[ch, s, a - 1] if a > 0 else 0.0
                        sums[ch, d] += H[ch, s, b - 1] - lo
        counts[d] = cnt
    return sums, counts


def hiwyn_scatter(H, owner):
    C, n, n2 = H.shape
    sums = np.zeros((C, n))
    counts = np.zeros(n, dtype=np.int64)
    for s in range(n):
        row = owner[s]
        dl, cl = np.unique(row[row >= 0], return_counts=True)
        pos = 0
        for d, c in zip(dl, cl):
            for ch in range(C):
                lo = H[ch, s, pos - 1] if pos > 0 else 0.0
                sums[ch, d] += H[ch, s, pos + c - 1] - lo
            counts[d] += c
            pos += c
    return sums, counts
