"""26-connected A* over the known map with obstacle inflation."""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .occupancy import OccupancyOctree


class StartBlockedError(ValueError):
    """The start voxel is not traversable (distinct from 'no path')."""


@dataclass
class PlanRequest:
    start: tuple
    goal: tuple
    inflation_radius: float = 0.6
    allow_unknown: bool = False
    max_altitude: Optional[float] = None
    goal_snap_radius: float = 2.0

    def __post_init__(self):
        if self.inflation_radius < 0:
            raise ValueError("inflation_radius must be non-negative")


@dataclass
class Path:
    waypoints: np.ndarray
    length: float

    def __len__(self) -> int:
        return len(self.waypoints)


OFFSETS = [o for o in itertools.product((-1, 0, 1), repeat=3) if o != (0, 0, 0)]


def inflation_structure(radius: float, resolution: float) -> np.ndarray:
    r = int(math.floor(radius / resolution + 1e-9))
    g = np.arange(-r, r + 1)
    d2 = g[:, None, None] ** 2 + g[None, :, None] ** 2 + g[None, None, :] ** 2
    return d2 * resolution ** 2 <= radius ** 2 + 1e-12


def inflated_obstacles(occ: OccupancyOctree, radius: float) -> np.ndarray:
    """Voxels whose center lies within ``radius`` of an OCCUPIED voxel center."""
    occupied = occ.occupied_mask()
    if radius <= 0 or not occupied.any():
        return occupied
    return ndimage.binary_dilation(occupied, structure=inflation_structure(radius, occ.resolution))


def traversable_mask(occ: OccupancyOctree, inflation_radius: float = 0.6,
                     allow_unknown: bool = False, max_altitude: Optional[float] = None) -> np.ndarray:
    ok = ~occ.known | occ.free_mask() if allow_unknown else occ.free_mask()
    ok = ok & ~inflated_obstacles(occ, inflation_radius)
    if max_altitude is not None:
        zc = occ.origin[2] + (np.arange(occ.shape[2]) + 0.5) * occ.resolution
        ok = ok & (zc <= max_altitude + 1e-9)[None, None, :]
    return ok


def snap_to_traversable(occ: OccupancyOctree, mask: np.ndarray, point, radius: float):
    """Key of the traversable voxel nearest ``point`` within ``radius``, or None."""
    lo = np.maximum(occ.keys_of(np.asarray(point) - radius)[0], 0)
    hi = np.minimum(occ.keys_of(np.asarray(point) + radius)[0] + 1, np.asarray(occ.shape))
    if np.any(hi <= lo):
        return None
    sl = tuple(slice(int(a), int(b)) for a, b in zip(lo, hi))
    keys = np.argwhere(mask[sl]) + lo
    if keys.shape[0] == 0:
        return None
    d2 = ((occ.centers_of(keys) - np.asarray(point)) ** 2).sum(axis=1)
    i = int(np.argmin(d2))
    if d2[i] > radius * radius + 1e-12:
        return None
    return tuple(int(v) for v in keys[i])


def plan(occ: OccupancyOctree, req: PlanRequest, mask: Optional[np.ndarray] = None) -> Optional[Path]:
    """Shortest 26-connected path between voxel centers, or None if unreachable.

    Raises :class:`StartBlockedError` if the start voxel is not traversable.
    """
    if mask is None:
        mask = traversable_mask(occ, req.inflation_radius, req.allow_unknown, req.max_altitude)
    sk = occ.keys_of(req.start)[0]
    if not occ.in_bounds(sk)[0] or not mask[tuple(sk)]:
        raise StartBlockedError(f"start {tuple(req.start)} is not traversable")
    start = tuple(int(v) for v in sk)

    gk = occ.keys_of(req.goal)[0]
    if occ.in_bounds(gk)[0] and mask[tuple(gk)]:
        goal = tuple(int(v) for v in gk)
    else:
        goal = snap_to_traversable(occ, mask, req.goal, req.goal_snap_radius)
        if goal is None:
            return None

    keys = _astar(mask, start, goal)
    if keys is None:
        return None
    waypoints = occ.centers_of(np.asarray(keys))
    length = float(np.linalg.norm(np.diff(waypoints, axis=0), axis=1).sum()) if len(keys) > 1 else 0.0
    return Path(waypoints, length)


def _astar(mask: np.ndarray, start: tuple, goal: tuple) -> Optional[list]:
    if start == goal:
        return [start]
    sx, sy, sz = mask.shape
    # pad so neighbour lookups never leave the array
    padded = np.zeros((sx + 2, sy + 2, sz + 2), dtype=bool)
    padded[1:-1, 1:-1, 1:-1] = mask
    free = padded.ravel().tolist()
    syz = (sy + 2) * (sz + 2)
    pz = sz + 2

    def flat(k):
        return (k[0] + 1) * syz + (k[1] + 1) * pz + (k[2] + 1)

    steps = [(ox * syz + oy * pz + oz, math.sqrt(ox * ox + oy * oy + oz * oz)) for ox, oy, oz in OFFSETS]
    s, g = flat(start), flat(goal)
    gx, gy, gz = goal

    def h(i):
        x, r = divmod(i, syz)
        y, z = divmod(r, pz)
        return math.sqrt((x - 1 - gx) ** 2 + (y - 1 - gy) ** 2 + (z - 1 - gz) ** 2)

    best = {s: 0.0}
    parent = {s: -1}
    closed = set()
    counter = itertools.count()
    heap = [(h(s), next(counter), s)]
    while heap:
        _, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur == g:
            break
        closed.add(cur)
        gc = best[cur]
        for d, c in steps:
            nb = cur + d
            if not free[nb] or nb in closed:
                continue
            ng = gc + c
            if ng < best.get(nb, math.inf) - 1e-12:
                best[nb] = ng
                parent[nb] = cur
                heapq.heappush(heap, (ng + h(nb), next(counter), nb))
    else:
        return None
    out = []
    cur = g
    while cur != -1:
        x, r = divmod(cur, syz)
        y, z = divmod(r, pz)
        out.append((x - 1, y - 1, z - 1))
        cur = parent[cur]
    return out[::-1]
