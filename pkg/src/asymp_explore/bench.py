"""Frontier-maintenance cost versus frontier count and map churn.

Each configuration builds a map with a block of ``n_frontiers`` seeded
frontier voxels in unknown space, and a separate block in which
``changed_cells`` voxels are wiped and re-observed by parallel rays before
every repetition. The timed section is one frontier step as run after a scan:
inserting candidates for a fixed ray bundle, then the validation pass.
"""

from __future__ import annotations

import csv
import gc
import time
from dataclasses import dataclass

import numpy as np

from .frontiers import FrontierStore
from .occupancy import OccupancyOctree
from .sensor import SensorModel, SensorPose

BENCH_COLUMNS = ("n_frontiers", "changed_cells", "rep", "t_frontier_us", "t_correct_us")

RES = 0.4
HALF_X = 50  # voxels per block along x
SHAPE_YZ = (100, 30)
RAY_LEN = 40  # voxels re-observed by each churn ray


@dataclass
class BenchFixture:
    occ: OccupancyOctree
    store: FrontierStore
    robot: np.ndarray
    origins: np.ndarray
    ends: np.ndarray


def _make_fixture(n_frontiers: int, seed: int) -> BenchFixture:
    sy, sz = SHAPE_YZ
    occ = OccupancyOctree((0.0, 0.0, 0.0), (2 * HALF_X * RES, sy * RES, sz * RES), RES)
    capacity = HALF_X * sy * sz
    if n_frontiers > capacity:
        raise ValueError(f"at most {capacity} frontiers fit the benchmark map")
    rng = np.random.default_rng(seed)
    flat = rng.choice(capacity, size=n_frontiers, replace=False)
    keys = np.stack(np.unravel_index(flat, (HALF_X, sy, sz)), axis=1)
    store = FrontierStore()
    store.seed(occ, keys)
    robot = occ.center_of((HALF_X + HALF_X // 2, sy // 2, sz // 2))
    origins, dirs = SensorModel.coarse().rays_from(SensorPose(robot, 0.0))
    ends = origins + dirs * SensorModel.coarse().max_range
    return BenchFixture(occ, store, robot, origins, ends)


def _churn(occ: OccupancyOctree, changed_cells: int) -> None:
    """Wipe the churn block, then re-observe ``changed_cells`` voxels with parallel rays."""
    sy, sz = SHAPE_YZ
    lo, hi = (HALF_X, 0, 0), (2 * HALF_X, sy, sz)
    occ.reset_region(lo, hi)
    if changed_cells <= 0:
        return
    n_rays = -(-changed_cells // RAY_LEN)
    if n_rays > sy * sz:
        raise ValueError(f"at most {sy * sz * RAY_LEN} changed cells fit the benchmark map")
    yz = np.stack(np.unravel_index(np.arange(n_rays), (sy, sz)), axis=1)
    kx = HALF_X + 5 + np.arange(RAY_LEN)
    keys = np.concatenate([np.column_stack([kx, np.full(RAY_LEN, y), np.full(RAY_LEN, z)]) for y, z in yz])
    keys = keys[:changed_cells]
    hits = np.zeros(keys.shape[0], dtype=bool)
    hits[RAY_LEN - 1::RAY_LEN] = True  # each ray ends on an obstacle
    occ.apply_updates(occ.flat_index(keys), hits)


def time_frontier_step(fx: BenchFixture) -> tuple:
    """``(t_frontier_us, t_correct_us)`` for one insert + validation pass on a copy of the store."""
    store = fx.store.copy()
    t0 = time.perf_counter_ns()
    store.insert_candidates(fx.occ, fx.origins, fx.ends)
    t1 = time.perf_counter_ns()
    store.correct(fx.occ, fx.robot)
    t2 = time.perf_counter_ns()
    return (t2 - t0) / 1e3, (t2 - t1) / 1e3


def bench_frontier(sizes=(1_000, 10_000, 100_000), cfactors=(1, 10), base_changed: int = 2_000,
                   reps: int = 20, seed: int = 0) -> list:
    """Rows of :data:`BENCH_COLUMNS`, one per repetition.

    ``changed_cells = base_changed * cfactor`` for each entry of ``cfactors``.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    fixtures = [(int(n), _make_fixture(int(n), seed)) for n in sizes]
    configs = [(n, fx, int(round(base_changed * cf))) for n, fx in fixtures for cf in cfactors]
    rows = []
    gc_was_enabled = gc.isenabled()
    gc.collect()
    gc.disable()
    try:
        # repetitions are interleaved across configurations so slow drifts in
        # machine load spread evenly instead of biasing one configuration
        for rep in range(reps):
            for n, fx, changed in configs:
                _churn(fx.occ, changed)
                t_front, t_corr = time_frontier_step(fx)
                rows.append({"n_frontiers": n, "changed_cells": changed, "rep": rep,
                             "t_frontier_us": int(round(t_front)), "t_correct_us": int(round(t_corr))})
    finally:
        if gc_was_enabled:
            gc.enable()
    rows.sort(key=lambda r: (r["n_frontiers"], r["changed_cells"], r["rep"]))
    return rows


def median_table(rows, column: str = "t_frontier_us") -> dict:
    """``{(n_frontiers, changed_cells): median}`` over repetitions."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["n_frontiers"], r["changed_cells"]), []).append(r[column])
    return {k: float(np.median(v)) for k, v in groups.items()}


def linear_fit(x, y) -> tuple:
    """Least-squares ``y = a x + b``; returns ``(a, b, r_squared)``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    a, b = np.polyfit(x, y, 1)
    ss_res = float(((y - (a * x + b)) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    return float(a), float(b), 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


def write_bench(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(BENCH_COLUMNS))
        w.writeheader()
        w.writerows(rows)
