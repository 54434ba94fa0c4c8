"""Hash-keyed frontier set maintained by forward-model insertion and a linear validation pass."""

from __future__ import annotations

import numpy as np

from .occupancy import OccupancyOctree, VoxelKey, morton_codes
from .sensor import point_behind, points_behind


class FrontierStore:
    """Candidate frontier voxels keyed by voxel key, valued by voxel center."""

    def __init__(self, clear_radius: float = 1.0):
        if clear_radius < 0:
            raise ValueError("clear_radius must be non-negative")
        self.clear_radius = float(clear_radius)
        self._entries: dict = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key) -> bool:
        return tuple(key) in self._entries

    def keys(self):
        return [VoxelKey(*k) for k in self._entries]

    def copy(self) -> "FrontierStore":
        other = FrontierStore(self.clear_radius)
        other._entries = dict(self._entries)
        return other

    def _add(self, key: tuple, center) -> bool:
        if key in self._entries:
            return False
        self._entries[key] = (float(center[0]), float(center[1]), float(center[2]))
        return True

    def insert_candidate(self, occ: OccupancyOctree, ray_origin, ray_end) -> bool:
        """Add the voxel just behind ``ray_end`` if the map has no node there."""
        behind = point_behind(ray_origin, ray_end, occ.resolution)
        k = occ.keys_of(behind)[0]
        if not occ.in_bounds(k)[0]:
            return False
        key = (int(k[0]), int(k[1]), int(k[2]))
        if occ.search(key) is not None:
            return False
        return self._add(key, occ.center_of(key))

    def insert_candidates(self, occ: OccupancyOctree, ray_origins, ray_ends) -> int:
        """Batched :meth:`insert_candidate`; returns the number of new entries."""
        ends = np.atleast_2d(np.asarray(ray_ends, dtype=np.float64))
        if ends.shape[0] == 0:
            return 0
        behind = points_behind(ray_origins, ends, occ.resolution)
        keys = occ.keys_of(behind)
        keys = keys[occ.in_bounds(keys)]
        if keys.shape[0] == 0:
            return 0
        keys = keys[~occ.known[keys[:, 0], keys[:, 1], keys[:, 2]]]
        centers = occ.centers_of(keys)
        added = 0
        for k, c in zip(keys.tolist(), centers.tolist()):
            added += self._add(tuple(k), c)
        return added

    def seed(self, occ: OccupancyOctree, keys) -> int:
        """Insert keys directly (benchmark and test setup)."""
        keys = np.asarray(keys, dtype=np.int64).reshape(-1, 3)
        added = 0
        for k, c in zip(keys.tolist(), occ.centers_of(keys).tolist()):
            added += self._add(tuple(k), c)
        return added

    def correct(self, occ: OccupancyOctree, robot_pos) -> tuple:
        """One pass over every entry: drop known voxels, then ones near the robot.

        Returns ``(n_erased_known, n_erased_near)``.
        """
        known = occ.known
        rx, ry, rz = (float(v) for v in robot_pos)
        r2 = self.clear_radius * self.clear_radius
        erase_known = []
        erase_near = []
        for key, (x, y, z) in self._entries.items():
            if known[key]:
                erase_known.append(key)
            elif (x - rx) ** 2 + (y - ry) ** 2 + (z - rz) ** 2 <= r2:
                erase_near.append(key)
        entries = self._entries
        for key in erase_known:
            del entries[key]
        for key in erase_near:
            del entries[key]
        return len(erase_known), len(erase_near)

    def discard(self, keys) -> int:
        n = 0
        for k in keys:
            n += self._entries.pop(tuple(int(v) for v in k), None) is not None
        return n

    def snapshot_keys(self) -> np.ndarray:
        if not self._entries:
            return np.zeros((0, 3), dtype=np.int64)
        keys = np.array(list(self._entries), dtype=np.int64)
        return keys[np.argsort(morton_codes(keys), kind="stable")]

    def snapshot(self) -> np.ndarray:
        """Frontier voxel centers, ordered by Morton code of their keys."""
        keys = self.snapshot_keys()
        if keys.shape[0] == 0:
            return np.zeros((0, 3))
        return np.array([self._entries[tuple(k)] for k in keys.tolist()])
