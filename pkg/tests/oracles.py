"""Slow scalar reference implementations used only to cross-check vectorized code."""

import math

import numpy as np


def patch_scale_loop(x, W):
    h, w = len(x), len(x[0])
    out = [[0.0] * w for _ in range(h)]
    for top in range(0, h, W):
        for left in range(0, w, W):
            rows = range(top, min(top + W, h))
            cols = range(left, min(left + W, w))
            vals = [x[i][j] for i in rows for j in cols]
            lo, hi = min(vals), max(vals)
            for i in rows:
                for j in cols:
                    out[i][j] = 0.0 if hi == lo else 2.0 * ((x[i][j] - lo) / (hi - lo)) - 1.0
    return out


def nonlinearity_scalar(v, delta):
    if v > 0:
        return math.exp(delta * v) - 1
    if v < 0:
        return 1 - math.exp(-delta * v)
    return 0.0


def hdrmax_loop(x, W, delta, noise=None):
    """Transform by loops; ``noise`` is an explicit field added pixel by pixel."""
    s = patch_scale_loop(x, W)
    out = []
    for i, row in enumerate(s):
        out.append([
            nonlinearity_scalar(v, delta) + (0.0 if noise is None else float(noise[i][j]))
            for j, v in enumerate(row)
        ])
    return np.array(out)


def gaussian_taps_loop(size, sigma):
    r = (size - 1) / 2
    g = [math.exp(-((k - r) ** 2) / (2 * sigma * sigma)) for k in range(size)]
    s = sum(g)
    return [v / s for v in g]


def mscn_loop(x, size=7, sigma=7 / 6, c=0.001):
    """MSCN with an explicit 2-D window and half-sample symmetric borders."""
    x = np.asarray(x, dtype=float)
    h, w = x.shape
    r = size // 2
    p = np.pad(x, r, mode="symmetric")
    g = gaussian_taps_loop(size, sigma)
    out = np.zeros_like(x)
    for i in range(h):
        for j in range(w):
            mu = 0.0
            m2 = 0.0
            for a in range(size):
                for b in range(size):
                    v = p[i + a, j + b]
                    wgt = g[a] * g[b]
                    mu += wgt * v
                    m2 += wgt * v * v
            sd = math.sqrt(max(m2 - mu * mu, 0.0))
            out[i, j] = (x[i, j] - mu) / (sd + c)
    return out


def pairwise_loop(m):
    m = np.asarray(m, dtype=float)
    h, w = m.shape
    H = [[m[i, j] * m[i, j + 1] for j in range(w - 1)] for i in range(h)]
    V = [[m[i, j] * m[i + 1, j] for j in range(w)] for i in range(h - 1)]
    D1 = [[m[i, j] * m[i + 1, j + 1] for j in range(w - 1)] for i in range(h - 1)]
    D2 = [[m[i, j] * m[i + 1, j - 1] for j in range(1, w)] for i in range(h - 1)]
    return [np.array(g) for g in (H, V, D1, D2)]


def pearson_loop(a, b):
    n = len(a)
    ma, mb = sum(a) / n, sum(b) / n
    num = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    return num / math.sqrt(sum((x - ma) ** 2 for x in a) * sum((y - mb) ** 2 for y in b))
