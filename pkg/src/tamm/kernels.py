"""Numeric inner loops, each in a numba and a pure-numpy flavour.

The public names (``segment_min_distances``, ``timecost_batch``,
``gravity_weights``, ``nearest_scan``) are bound to the numba versions unless
``TAMM_DISABLE_NUMBA`` is set to a truthy value or numba is not importable.
Both flavours stay importable under ``*_nb`` / ``*_np`` for testing and
benchmarking.
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_DISABLED = os.environ.get("TAMM_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")
HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _DISABLED


def _jit(fn):
    if not HAVE_NUMBA:
        return None
    return numba.njit(cache=True, nogil=True)(fn)


# -- point to polyline distance -------------------------------------------------


def segment_min_distances_np(px, py, ax, ay, bx, by, offsets):
    """Distance from (px, py) to each polyline.

    Sub-segments ``offsets[i]:offsets[i+1]`` of the flat ``a -> b`` arrays
    belong to polyline ``i``.
    """
    dx = bx - ax
    dy = by - ay
    seg2 = dx * dx + dy * dy
    with np.errstate(invalid="ignore", divide="ignore"):
        t = ((px - ax) * dx + (py - ay) * dy) / seg2
    t = np.where(seg2 > 0.0, np.clip(t, 0.0, 1.0), 0.0)
    # a clamped end uses the vertex itself (a + 1 * (b - a) need not equal b),
    # so polylines meeting at a vertex report bit-identical distances to it
    qx = np.where(t >= 1.0, bx, ax + t * dx)
    qy = np.where(t >= 1.0, by, ay + t * dy)
    d = np.hypot(px - qx, py - qy)
    return np.minimum.reduceat(d, offsets[:-1])


def _segment_min_distances(px, py, ax, ay, bx, by, offsets):
    n = offsets.shape[0] - 1
    out = np.empty(n)
    for i in range(n):
        best = np.inf
        for j in range(offsets[i], offsets[i + 1]):
            dx = bx[j] - ax[j]
            dy = by[j] - ay[j]
            seg2 = dx * dx + dy * dy
            t = 0.0
            if seg2 > 0.0:
                t = ((px - ax[j]) * dx + (py - ay[j]) * dy) / seg2
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            if t >= 1.0:
                ex = px - bx[j]
                ey = py - by[j]
            else:
                ex = px - (ax[j] + t * dx)
                ey = py - (ay[j] + t * dy)
            d = np.hypot(ex, ey)
            if d < best:
                best = d
        out[i] = best
    return out


segment_min_distances_nb = _jit(_segment_min_distances)


def nearest_scan_np(qx, qy, ax, ay, bx, by, offsets, k):
    """Exhaustive k-nearest polylines for many query points.

    Returns (indices, distances), each of shape (len(qx), k), ordered by
    distance then polyline index.
    """
    n = offsets.shape[0] - 1
    k = min(k, n)
    idx = np.empty((qx.shape[0], k), dtype=np.int64)
    dist = np.empty((qx.shape[0], k))
    for q in range(qx.shape[0]):
        d = segment_min_distances_np(qx[q], qy[q], ax, ay, bx, by, offsets)
        order = np.lexsort((np.arange(n), d))[:k]
        idx[q] = order
        dist[q] = d[order]
    return idx, dist


def _nearest_scan(qx, qy, ax, ay, bx, by, offsets, k):
    n = offsets.shape[0] - 1
    if k > n:
        k = n
    idx = np.empty((qx.shape[0], k), dtype=np.int64)
    dist = np.empty((qx.shape[0], k))
    for q in range(qx.shape[0]):
        d = segment_min_distances_nb(qx[q], qy[q], ax, ay, bx, by, offsets)
        # argsort(kind="mergesort") is stable, so equal distances keep index order
        order = np.argsort(d, kind="mergesort")
        for j in range(k):
            idx[q, j] = order[j]
            dist[q, j] = d[order[j]]
    return idx, dist


nearest_scan_nb = _jit(_nearest_scan)


# -- timecost -------------------------------------------------------------------


def timecost_batch_np(length, travel_time, alpha_deg, linespeed):
    """Vectorised step-by-step timecost: |expected length - length|."""
    projected = length * np.cos(np.radians(alpha_deg))
    time_expected = projected / linespeed
    expected = length * time_expected / travel_time
    return np.abs(expected - length)


def _timecost_batch(length, travel_time, alpha_deg, linespeed):
    out = np.empty(length.shape[0])
    for i in range(length.shape[0]):
        projected = length[i] * np.cos(alpha_deg[i] * np.pi / 180.0)
        time_expected = projected / linespeed[i]
        expected = length[i] * time_expected / travel_time[i]
        out[i] = abs(expected - length[i])
    return out


timecost_batch_nb = _jit(_timecost_batch)


# -- gravity weights ------------------------------------------------------------


def gravity_weights_np(dists, angs):
    """Return (w_d, w_theta, gf) for one candidate set."""
    sd = dists.sum()
    sa = angs.sum()
    w_d = 1.0 - dists / sd if sd > 0.0 else np.ones_like(dists)
    w_t = 1.0 - angs / sa if sa > 0.0 else np.ones_like(angs)
    return w_d, w_t, w_d * w_t


def _gravity_weights(dists, angs):
    n = dists.shape[0]
    sd = 0.0
    sa = 0.0
    for i in range(n):
        sd += dists[i]
        sa += angs[i]
    w_d = np.empty(n)
    w_t = np.empty(n)
    gf = np.empty(n)
    for i in range(n):
        w_d[i] = 1.0 - dists[i] / sd if sd > 0.0 else 1.0
        w_t[i] = 1.0 - angs[i] / sa if sa > 0.0 else 1.0
        gf[i] = w_d[i] * w_t[i]
    return w_d, w_t, gf


gravity_weights_nb = _jit(_gravity_weights)


if USE_NUMBA:
    segment_min_distances = segment_min_distances_nb
    nearest_scan = nearest_scan_nb
    timecost_batch = timecost_batch_nb
    gravity_weights = gravity_weights_nb
else:
    segment_min_distances = segment_min_distances_np
    nearest_scan = nearest_scan_np
    timecost_batch = timecost_batch_np
    gravity_weights = gravity_weights_np

BACKEND = "numba" if USE_NUMBA else "numpy"
