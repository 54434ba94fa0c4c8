"""Probabilistic occupancy map with log-odds updates and ray primitives.

The map is bounded and addressed by integer voxel keys at the finest depth.
Storage is a dense log-odds grid plus a ``known`` mask: a voxel whose mask bit
is clear has no node (UNKNOWN), exactly like a missing leaf in an octree.
Morton codes are derived from keys for deterministic ordering.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .traversal import segment_keys


class OutOfBoundsError(ValueError):
    """A key or point lies outside the configured map bounds."""


class EmptyRayError(ValueError):
    """A ray or segment has zero length."""


class OccupancyState(enum.Enum):
    UNKNOWN = 0
    FREE = 1
    OCCUPIED = 2


class VoxelKey(NamedTuple):
    kx: int
    ky: int
    kz: int


def log_odds(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    return math.log(p / (1.0 - p))


def probability_of(value: float) -> float:
    return 1.0 / (1.0 + math.exp(-value))


def log_odds_update(prior: float, p_meas: float, p_node: float = 0.5) -> float:
    """Unclamped additive log-odds update of ``prior`` by one measurement."""
    return prior + log_odds(p_meas) - log_odds(p_node)


def bayes_update_reference(p_prior: float, p_meas: float, p_node: float = 0.5) -> float:
    """Occupancy posterior evaluated directly in probability space.

    Reference form of the recursive binary Bayes filter; the map itself uses
    the additive log-odds form.
    """
    for p in (p_prior, p_meas, p_node):
        if not 0.0 < p < 1.0:
            raise ValueError(f"probability must lie in (0, 1), got {p}")
    odds = ((1.0 - p_meas) / p_meas) * ((1.0 - p_prior) / p_prior) * (p_node / (1.0 - p_node))
    return 1.0 / (1.0 + odds)


@dataclass(frozen=True)
class OccupancyParams:
    p_hit: float = 0.7
    p_miss: float = 0.4
    p_min: float = 0.12
    p_max: float = 0.971
    threshold: float = 0.5


def _spread_bits(v: np.ndarray) -> np.ndarray:
    v = v.astype(np.uint64) & np.uint64(0x1FFFFF)
    v = (v | (v << np.uint64(32))) & np.uint64(0x1F00000000FFFF)
    v = (v | (v << np.uint64(16))) & np.uint64(0x1F0000FF0000FF)
    v = (v | (v << np.uint64(8))) & np.uint64(0x100F00F00F00F00F)
    v = (v | (v << np.uint64(4))) & np.uint64(0x10C30C30C30C30C3)
    v = (v | (v << np.uint64(2))) & np.uint64(0x1249249249249249)
    return v


def morton_codes(keys) -> np.ndarray:
    """Interleaved-bit (x lowest) Morton codes for an ``(N, 3)`` key array."""
    keys = np.asarray(keys, dtype=np.int64).reshape(-1, 3)
    return (
        _spread_bits(keys[:, 0])
        | (_spread_bits(keys[:, 1]) << np.uint64(1))
        | (_spread_bits(keys[:, 2]) << np.uint64(2))
    )


def morton_code(key: Sequence[int]) -> int:
    return int(morton_codes(np.asarray([key]))[0])


class OccupancyOctree:
    """Bounded occupancy map over voxels of edge ``resolution``.

    ``origin`` is the minimum corner of the bounds; voxel ``k`` spans
    ``[origin + k*res, origin + (k+1)*res)`` on each axis.
    """

    def __init__(self, bounds_min, bounds_max, resolution: float = 0.4,
                 params: Optional[OccupancyParams] = None):
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        self.resolution = float(resolution)
        self.origin = np.asarray(bounds_min, dtype=np.float64).copy()
        extent = np.asarray(bounds_max, dtype=np.float64) - self.origin
        if np.any(extent <= 0):
            raise ValueError("bounds_max must exceed bounds_min on every axis")
        self.shape = tuple(int(math.ceil(e / self.resolution - 1e-9)) for e in extent)
        self.depth = max(1, int(math.ceil(math.log2(max(self.shape)))))
        self.params = params or OccupancyParams()
        p = self.params
        self.l_hit = log_odds(p.p_hit)
        self.l_miss = log_odds(p.p_miss)
        self.l_min = log_odds(p.p_min)
        self.l_max = log_odds(p.p_max)
        self.l_threshold = log_odds(p.threshold)
        self.log_odds = np.zeros(self.shape)
        self.known = np.zeros(self.shape, dtype=bool)

    # -- addressing ---------------------------------------------------------

    @property
    def bounds_max(self) -> np.ndarray:
        return self.origin + np.asarray(self.shape) * self.resolution

    def keys_of(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.floor((pts - self.origin) / self.resolution).astype(np.int64)

    def in_bounds(self, keys) -> np.ndarray:
        k = np.atleast_2d(np.asarray(keys))
        return np.all((k >= 0) & (k < np.asarray(self.shape)), axis=-1)

    def key_of(self, point) -> VoxelKey:
        k = self.keys_of(point)[0]
        if not self.in_bounds(k)[0]:
            raise OutOfBoundsError(f"point {tuple(point)} outside map bounds")
        return VoxelKey(int(k[0]), int(k[1]), int(k[2]))

    def center_of(self, key) -> np.ndarray:
        return self.origin + (np.asarray(key, dtype=np.float64) + 0.5) * self.resolution

    def centers_of(self, keys) -> np.ndarray:
        return self.origin + (np.asarray(keys, dtype=np.float64) + 0.5) * self.resolution

    def _check_key(self, key) -> tuple:
        k = tuple(int(v) for v in key)
        if not all(0 <= k[i] < self.shape[i] for i in range(3)):
            raise OutOfBoundsError(f"key {k} outside map bounds {self.shape}")
        return k

    # -- queries ------------------------------------------------------------

    def search(self, key) -> Optional[float]:
        """Log-odds of the node at ``key``, or None when it has no node."""
        k = tuple(key)
        if not all(0 <= k[i] < self.shape[i] for i in range(3)):
            return None
        if not self.known[k]:
            return None
        return float(self.log_odds[k])

    def state_of(self, key) -> OccupancyState:
        k = self._check_key(key)
        if not self.known[k]:
            return OccupancyState.UNKNOWN
        if self.log_odds[k] > self.l_threshold:
            return OccupancyState.OCCUPIED
        return OccupancyState.FREE

    def state_at(self, point) -> OccupancyState:
        return self.state_of(self.key_of(point))

    def probability_at_key(self, key) -> float:
        k = self._check_key(key)
        return probability_of(float(self.log_odds[k])) if self.known[k] else 0.5

    def occupied_mask(self) -> np.ndarray:
        return self.known & (self.log_odds > self.l_threshold)

    def free_mask(self) -> np.ndarray:
        return self.known & (self.log_odds <= self.l_threshold)

    def box_index_range(self, center, half_edge: float):
        """Per-axis ``(lo, hi)`` key ranges of voxels whose centers lie in the cube."""
        if half_edge <= 0:
            raise ValueError("half_edge must be positive")
        c = (np.asarray(center, dtype=np.float64) - self.origin) / self.resolution - 0.5
        h = half_edge / self.resolution
        lo = np.ceil(c - h - 1e-9).astype(np.int64)
        hi = np.floor(c + h + 1e-9).astype(np.int64) + 1
        lo = np.maximum(lo, 0)
        hi = np.minimum(hi, np.asarray(self.shape))
        if np.any(hi <= lo):
            raise OutOfBoundsError("box does not intersect map bounds")
        return lo, hi

    def count_states_in_box(self, center, half_edge: float):
        """``(n_free, n_occupied, n_unknown)`` over the in-bounds part of a cube."""
        lo, hi = self.box_index_range(center, half_edge)
        sl = tuple(slice(int(a), int(b)) for a, b in zip(lo, hi))
        known = self.known[sl]
        occ = known & (self.log_odds[sl] > self.l_threshold)
        n_total = known.size
        n_known = int(np.count_nonzero(known))
        n_occ = int(np.count_nonzero(occ))
        return n_known - n_occ, n_occ, n_total - n_known

    # -- updates ------------------------------------------------------------

    def update_node(self, key, occupied_measurement: bool) -> OccupancyState:
        k = self._check_key(key)
        base = self.log_odds[k] if self.known[k] else 0.0
        delta = self.l_hit if occupied_measurement else self.l_miss
        self.log_odds[k] = min(max(base + delta, self.l_min), self.l_max)
        self.known[k] = True
        return self.state_of(k)

    def apply_updates(self, flat_index, occupied) -> None:
        """Apply an ordered batch of hit/miss updates given flat voxel indices.

        Equivalent to calling :meth:`update_node` once per entry in order:
        voxels receiving updates of a single sign are folded in one clamped
        sum; voxels receiving both signs are replayed sequentially.
        """
        idx = np.asarray(flat_index, dtype=np.int64).ravel()
        if idx.size == 0:
            return
        hit = np.asarray(occupied, dtype=bool).ravel()
        delta = np.where(hit, self.l_hit, self.l_miss)
        lo_flat = self.log_odds.reshape(-1)
        known_flat = self.known.reshape(-1)
        uniq, inv = np.unique(idx, return_inverse=True)
        n_hit = np.bincount(inv, weights=hit, minlength=uniq.size)
        n_miss = np.bincount(inv, weights=~hit, minlength=uniq.size)
        mixed = (n_hit > 0) & (n_miss > 0)
        sums = np.bincount(inv, weights=delta, minlength=uniq.size)

        simple = uniq[~mixed]
        base = np.where(known_flat[simple], lo_flat[simple], 0.0)
        lo_flat[simple] = np.clip(base + sums[~mixed], self.l_min, self.l_max)
        known_flat[simple] = True

        if mixed.any():
            for j in np.nonzero(mixed[inv])[0]:
                i = idx[j]
                b = lo_flat[i] if known_flat[i] else 0.0
                lo_flat[i] = min(max(b + delta[j], self.l_min), self.l_max)
                known_flat[i] = True

    def flat_index(self, keys) -> np.ndarray:
        k = np.asarray(keys, dtype=np.int64).reshape(-1, 3)
        return np.ravel_multi_index((k[:, 0], k[:, 1], k[:, 2]), self.shape)

    def reset_region(self, lo, hi) -> None:
        """Forget every node in the key range ``[lo, hi)`` (back to UNKNOWN)."""
        sl = tuple(slice(int(a), int(b)) for a, b in zip(lo, hi))
        self.known[sl] = False
        self.log_odds[sl] = 0.0

    # -- rays ---------------------------------------------------------------

    def walk(self, starts, ends):
        """Batched traversal truncated at the first out-of-bounds voxel.

        Returns ``(keys, counts, t_enter)`` as :func:`segment_keys`, with
        ``counts`` reduced to the in-bounds prefix (0 if the start is outside).
        """
        keys, counts, t_enter = segment_keys(starts, ends, self.origin, self.resolution)
        inside = self.in_bounds(keys)
        cols = np.arange(keys.shape[1])[None, :]
        outside = (~inside) & (cols < counts[:, None])
        first_out = np.where(outside.any(axis=1), outside.argmax(axis=1), counts)
        return keys, np.minimum(counts, first_out), t_enter

    def traverse_ray(self, origin, end) -> list:
        origin = np.asarray(origin, dtype=np.float64)
        end = np.asarray(end, dtype=np.float64)
        if np.array_equal(origin, end):
            raise EmptyRayError("zero-length segment")
        for p in (origin, end):
            if not self.in_bounds(self.keys_of(p))[0]:
                raise OutOfBoundsError(f"point {tuple(p)} outside map bounds")
        keys, counts, _ = segment_keys(origin, end, self.origin, self.resolution)
        return [VoxelKey(int(a), int(b), int(c)) for a, b, c in keys[0, :counts[0]]]

    def insert_ray(self, origin, hit) -> int:
        """Miss-update every voxel strictly before the voxel containing ``hit``."""
        keys = self.traverse_ray(origin, hit)[:-1]
        if keys:
            self.apply_updates(self.flat_index(keys), np.zeros(len(keys), dtype=bool))
        return len(keys)

    def cast_rays(self, origins, directions, max_range: float):
        """First OCCUPIED voxel along each ray; UNKNOWN voxels are traversed.

        Returns ``(keys, counts, hit_col, hit_dist)`` where ``hit_col[i]`` is
        the column of the hit in ``keys[i]`` (or -1) and ``hit_dist[i]`` its
        entry distance (``inf`` for no hit).
        """
        origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
        directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
        if max_range <= 0:
            raise ValueError("max_range must be positive")
        norms = np.linalg.norm(directions, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("ray directions must be unit vectors")
        if not np.all(self.in_bounds(self.keys_of(origins))):
            raise OutOfBoundsError("ray origin outside map bounds")
        keys, counts, t_enter = self.walk(origins, origins + directions * max_range)
        cols = np.arange(keys.shape[1])[None, :]
        valid = cols < counts[:, None]
        safe = np.where(valid[..., None], keys, 0)
        occ = self.occupied_mask()[safe[..., 0], safe[..., 1], safe[..., 2]] & valid
        has_hit = occ.any(axis=1)
        hit_col = np.where(has_hit, occ.argmax(axis=1), -1)
        rows = np.arange(keys.shape[0])
        hit_dist = np.where(has_hit, t_enter[rows, np.maximum(hit_col, 0)] * max_range, np.inf)
        return keys, counts, hit_col, hit_dist

    def cast_ray(self, origin, direction, max_range: float):
        """``(hit_key, entry_distance)`` of the first OCCUPIED voxel, or None."""
        keys, _, hit_col, hit_dist = self.cast_rays(origin, direction, max_range)
        if hit_col[0] < 0:
            return None
        k = keys[0, hit_col[0]]
        return VoxelKey(int(k[0]), int(k[1]), int(k[2])), float(hit_dist[0])

    # -- misc ---------------------------------------------------------------

    def copy(self) -> "OccupancyOctree":
        other = object.__new__(OccupancyOctree)
        other.__dict__.update(self.__dict__)
        other.log_odds = self.log_odds.copy()
        other.known = self.known.copy()
        return other

    def known_keys(self) -> np.ndarray:
        return np.argwhere(self.known)

    def dump_text(self) -> str:
        """``kx ky kz log_odds`` per known node, sorted by Morton code."""
        keys = self.known_keys()
        if keys.size == 0:
            return ""
        order = np.argsort(morton_codes(keys), kind="stable")
        lines = [
            f"{k[0]} {k[1]} {k[2]} {self.log_odds[tuple(k)]:.6f}" for k in keys[order]
        ]
        return "\n".join(lines) + "\n"
