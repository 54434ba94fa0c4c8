"""Batched voxel traversal on a uniform grid.

The walk is the Amanatides-Woo grid march, evaluated in closed form: for each
segment every axis-boundary crossing parameter is computed at once, the
crossings are merged by parameter, and the key sequence is the running sum of
the per-crossing unit steps. Cells are half-open, ``[low, high)``, so a point
lying exactly on a boundary belongs to the cell with the larger index.
"""

from __future__ import annotations

import numpy as np


TIE_TOL = 1e-9  # meters; crossings closer than this count as simultaneous


def segment_keys(starts, ends, origin, resolution: float, tie_tol: float = TIE_TOL):
    """Voxel keys crossed by each segment ``starts[i] -> ends[i]``, in order.

    Boundary crossings less than ``tie_tol`` meters apart along the segment
    are taken as one diagonal step. This makes every segment lying on the same
    geometric ray visit the same voxels, whatever its length: without it,
    rounding can send a ray exactly through a voxel edge on one side for one
    segment length and on the other side for another.

    Returns ``(keys, counts, t_enter)``:

    keys
        int64 array ``(N, M, 3)``; row ``i`` holds ``counts[i]`` valid keys,
        the rest repeat the last key.
    counts
        number of voxels visited by each segment (>= 1).
    t_enter
        ``(N, M)`` segment parameter in ``[0, 1]`` at which each voxel is
        entered (0 for the start voxel, ``inf`` past ``counts``).
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=np.float64))
    ends = np.atleast_2d(np.asarray(ends, dtype=np.float64))
    origin = np.asarray(origin, dtype=np.float64)
    rel0 = (starts - origin) / resolution
    rel1 = (ends - origin) / resolution
    c0 = np.floor(rel0).astype(np.int64)
    c1 = np.floor(rel1).astype(np.int64)
    delta = c1 - c0
    n_cross = np.abs(delta)
    step = np.sign(delta)
    span = rel1 - rel0
    n = starts.shape[0]

    t_parts = []
    axis_parts = []
    for a in range(3):
        m = int(n_cross[:, a].max()) if n else 0
        if m == 0:
            continue
        k = np.arange(m)
        lo = c0[:, a:a + 1]
        boundary = np.where(step[:, a:a + 1] > 0, lo + 1 + k, lo - k)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (boundary - rel0[:, a:a + 1]) / span[:, a:a + 1]
        t = np.where(k < n_cross[:, a:a + 1], t, np.inf)
        t_parts.append(t)
        axis_parts.append(np.full(m, a, dtype=np.int64))

    counts = n_cross.sum(axis=1) + 1
    if not t_parts:
        return c0[:, None, :].copy(), counts, np.zeros((n, 1))

    t_all = np.concatenate(t_parts, axis=1)
    axis_all = np.concatenate(axis_parts)
    order = np.argsort(t_all, axis=1, kind="stable")
    t_sorted = np.take_along_axis(t_all, order, axis=1)
    axis_sorted = axis_all[order]

    valid = np.isfinite(t_sorted)
    inc = np.zeros(t_sorted.shape + (3,), dtype=np.int64)
    rows = np.broadcast_to(np.arange(n)[:, None], axis_sorted.shape)
    inc[rows, np.arange(t_sorted.shape[1])[None, :], axis_sorted] = (
        np.take_along_axis(step, axis_sorted, axis=1) * valid
    )
    keys = np.concatenate([c0[:, None, :], c0[:, None, :] + np.cumsum(inc, axis=1)], axis=1)
    t_enter = np.concatenate([np.zeros((n, 1)), t_sorted], axis=1)

    # (near-)simultaneous crossings pass through an edge or corner:
    # step all axes at once instead of visiting a zero-length side voxel
    length = np.linalg.norm(ends - starts, axis=1)[:, None]
    tied = np.zeros_like(valid)
    with np.errstate(invalid="ignore"):
        gap = (t_sorted[:, 1:] - t_sorted[:, :-1]) * length
    tied[:, :-1] = valid[:, 1:] & (gap <= tie_tol)
    if tied.any():
        drop = np.concatenate([np.zeros((n, 1), dtype=bool), tied], axis=1)
        order = np.argsort(drop, axis=1, kind="stable")
        keys = np.take_along_axis(keys, order[..., None], axis=1)
        t_enter = np.take_along_axis(t_enter, order, axis=1)
        counts = counts - tied.sum(axis=1)
        cols = np.arange(keys.shape[1])[None, :]
        past = cols >= counts[:, None]
        last = keys[np.arange(n), counts - 1]
        keys = np.where(past[..., None], last[:, None, :], keys)
        t_enter = np.where(past, np.inf, t_enter)
    return keys, counts, t_enter

