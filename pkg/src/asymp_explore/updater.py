"""One full map update: inverse-model insertion, entropy bookkeeping,
forward-model free-space sweep and frontier maintenance."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .frontiers import FrontierStore
from .occupancy import OccupancyOctree, OutOfBoundsError
from .sensor import SensorModel, SensorPose

TIMING_PHASES = (
    "entropy_before",
    "insert",
    "free_space",
    "frontier_insert",
    "entropy_after",
    "frontier_correct",
)


@dataclass
class ScanInput:
    points: np.ndarray
    origin: SensorPose

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)


@dataclass
class UpdateReport:
    entropy_before: float = 0.0
    entropy_after: float = 0.0
    info_gain: float = 0.0
    n_hits: int = 0
    n_misses: int = 0
    n_free_updates: int = 0
    n_frontiers_added: int = 0
    n_frontiers_removed: int = 0
    timings_us: dict = field(default_factory=dict)

    @property
    def total_us(self) -> int:
        return self.timings_us.get("total", 0)

    def deterministic_fields(self) -> tuple:
        return (self.entropy_before, self.entropy_after, self.info_gain, self.n_hits,
                self.n_misses, self.n_free_updates, self.n_frontiers_added,
                self.n_frontiers_removed)


def binary_entropy(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log2(p) + (1.0 - p) * np.log2(1.0 - p))
    return np.where((p <= 0.0) | (p >= 1.0), 0.0, h)


def entropy_in_box(occ: OccupancyOctree, box_min, box_max) -> float:
    """Summed binary entropy (bits) of the voxels touched by a closed box.

    Unknown voxels count as p = 0.5, i.e. one bit each.
    """
    lo = np.maximum(occ.keys_of(box_min)[0], 0)
    hi = np.minimum(occ.keys_of(box_max)[0] + 1, np.asarray(occ.shape))
    if np.any(hi <= lo):
        return 0.0
    sl = tuple(slice(int(a), int(b)) for a, b in zip(lo, hi))
    known = occ.known[sl]
    n_unknown = known.size - int(np.count_nonzero(known))
    p = 1.0 / (1.0 + np.exp(-occ.log_odds[sl][known]))
    return float(n_unknown + binary_entropy(p).sum())


def scan_box(occ: OccupancyOctree, model: SensorModel, scan: ScanInput):
    """Bounding box of the scan points grown by one voxel, or a range cube if empty."""
    if scan.points.shape[0] == 0:
        c = np.asarray(scan.origin.position)
        return c - model.max_range, c + model.max_range
    return scan.points.min(axis=0) - occ.resolution, scan.points.max(axis=0) + occ.resolution


def _now() -> int:
    return time.perf_counter_ns()


def update_free_space(occ: OccupancyOctree, frontiers: FrontierStore, model: SensorModel,
                      pose: SensorPose, timings: dict | None = None) -> tuple:
    """Forward-model sweep: carve every no-return ray and seed a frontier behind its end.

    Returns ``(n_free_updates, n_frontier_inserts)``.
    """
    t0 = _now()
    origins, dirs = model.rays_from(pose)
    keys, counts, hit_col, _ = occ.cast_rays(origins, dirs, model.max_range)
    clear = hit_col < 0
    cols = np.arange(keys.shape[1])[None, :]
    # a no-hit ray has no OCCUPIED voxel on it, so every visited voxel is null or free
    carve = (cols < counts[:, None]) & clear[:, None]
    carve_keys = keys[carve]
    if carve_keys.shape[0]:
        occ.apply_updates(occ.flat_index(carve_keys), np.zeros(carve_keys.shape[0], dtype=bool))
    t1 = _now()
    n_ins = frontiers.insert_candidates(occ, origins[clear], origins[clear] + dirs[clear] * model.max_range)
    t2 = _now()
    if timings is not None:
        timings["free_space"] = (t1 - t0) // 1000
        timings["frontier_insert"] = (t2 - t1) // 1000
    return int(carve_keys.shape[0]), n_ins


def insert_scan_points(occ: OccupancyOctree, origin, points) -> tuple:
    """Per point: hit-update its voxel, then miss-update the ray up to it.

    Returns ``(n_hits, n_misses)``.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if points.shape[0] == 0:
        return 0, 0
    if not np.all(occ.in_bounds(occ.keys_of(points))):
        raise OutOfBoundsError("scan point outside map bounds")
    keys, counts, _ = occ.walk(np.broadcast_to(origin, points.shape), points)
    n, m = counts.shape[0], keys.shape[1]
    hit_keys = keys[np.arange(n), counts - 1]
    # event table: column 0 is the hit, columns 1.. the misses before it
    ev_keys = np.concatenate([hit_keys[:, None, :], keys[:, : m - 1, :]], axis=1) if m > 1 \
        else hit_keys[:, None, :]
    ev_cols = np.arange(ev_keys.shape[1])[None, :]
    ev_valid = ev_cols < counts[:, None]
    ev_hit = np.broadcast_to(ev_cols == 0, ev_valid.shape)
    occ.apply_updates(occ.flat_index(ev_keys[ev_valid]), ev_hit[ev_valid])
    return n, int(ev_valid.sum()) - n


def process_scan(occ: OccupancyOctree, frontiers: FrontierStore, model: SensorModel,
                 scan: ScanInput) -> UpdateReport:
    pose = scan.origin
    origin = np.asarray(pose.position, dtype=np.float64)
    if not occ.in_bounds(occ.keys_of(origin))[0]:
        raise OutOfBoundsError(f"scan origin {tuple(origin)} outside map bounds")
    timings: dict = {}
    report = UpdateReport(timings_us=timings)

    t_start = _now()
    box_min, box_max = scan_box(occ, model, scan)
    report.entropy_before = entropy_in_box(occ, box_min, box_max)
    t1 = _now()
    report.n_hits, report.n_misses = insert_scan_points(occ, origin, scan.points)
    t2 = _now()
    report.n_free_updates, report.n_frontiers_added = update_free_space(
        occ, frontiers, model, pose, timings)
    t3 = _now()
    report.entropy_after = entropy_in_box(occ, box_min, box_max)
    report.info_gain = report.entropy_before - report.entropy_after
    t4 = _now()
    n_known, n_near = frontiers.correct(occ, origin)
    report.n_frontiers_removed = n_known + n_near
    t_end = _now()

    timings["entropy_before"] = (t1 - t_start) // 1000
    timings["insert"] = (t2 - t1) // 1000
    timings["entropy_after"] = (t4 - t3) // 1000
    timings["frontier_correct"] = (t_end - t4) // 1000
    timings["total"] = (t_end - t_start) // 1000
    return report
