"""Small shared numerical helpers."""

import os

import numpy as np

TWO_PI = 2.0 * np.pi


def reduce_torus(xi):
    """Reduce momentum coordinates to the fundamental cell [-pi, pi)."""
    return np.mod(np.asarray(xi, dtype=float) + np.pi, TWO_PI) - np.pi


def as_points(p, dim):
    """Normalise a point argument to an array of shape (..., dim).

    Scalars and length-dim sequences denote a single point. Returns the
    array plus a flag telling whether the input was a single point.
    """
    a = np.asarray(p, dtype=float)
    if a.ndim == 0:
        if dim != 1:
            raise ValueError(f"scalar point given for dim={dim}")
        return a.reshape(1, 1), True
    if a.ndim == 1 and a.shape[0] == dim:
        return a.reshape(1, dim), True
    if a.shape[-1] != dim:
        raise ValueError(f"points must have last axis {dim}, got shape {a.shape}")
    return a, False


def fit_loglog_slope(xs, ys, floor=1e-300):
    """Least-squares slope of log(ys) against log(xs).

    Values below `floor` are clipped so that exact zeros (round-off
    residuals) do not poison the fit.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.maximum(np.abs(np.asarray(ys, dtype=float)), floor)
    if len(xs) < 2:
        raise ValueError("need at least two points for a slope fit")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def spectral_norm(a):
    return float(np.linalg.norm(a, 2))


def worker_count():
    """Thread count requested via LATTICEWEYL_THREADS (default 1)."""
    try:
        n = int(os.environ.get("LATTICEWEYL_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def philox_uniform(seed, n, dim, lows, highs, chunk=1 << 20):
    """Counter-based uniform samples, reproducible independent of chunking.

    Each chunk uses a Philox stream advanced to a fixed counter offset, so
    parallel or sequential generation yields bitwise identical output.
    """
    lows = np.broadcast_to(np.asarray(lows, dtype=float), (dim,))
    highs = np.broadcast_to(np.asarray(highs, dtype=float), (dim,))
    out = np.empty((n, dim))
    start = 0
    idx = 0
    while start < n:
        m = min(chunk, n - start)
        bit = np.random.Philox(key=seed)
        bit.advance(idx * (chunk * dim * 4))
        g = np.random.Generator(bit)
        out[start:start + m] = lows + (highs - lows) * g.random((m, dim))
        start += m
        idx += 1
    return out
