"""Closed-loop exploration missions, metrics logging and mode comparison."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Optional

import numpy as np
from scipy import ndimage

from .config import MissionConfig, Mode
from .frontiers import FrontierStore
from .gp import GpWindow
from .planner import Path, PlanRequest, StartBlockedError, plan, snap_to_traversable, traversable_mask
from .sensor import SensorPose
from .sim import RobotState, WorldKind, WorldModel, coverage, generate_world, simulate_scan, step_robot
from .updater import process_scan
from .viewpoints import GainSource, candidate_gains, cluster_candidates, rank_candidates

METRIC_COLUMNS = (
    "tick", "sim_time_s", "coverage_pct", "n_frontiers", "entropy_bits", "info_gain_bits",
    "t_map_us", "t_frontier_us", "t_cluster_us", "t_gain_us", "t_plan_us",
    "chosen_x", "chosen_y", "chosen_z",
)
DECISION_COLUMNS = ("tick", "n_candidates", "chosen_x", "chosen_y", "chosen_z", "info_gain", "score",
                    "gain_source")
GP_COLUMNS = ("tick", "n_free", "n_occupied", "n_unknown", "observed_gain", "predicted_gain")
SUMMARY_COLUMNS = ("mode", "metric", "mean", "std", "n")

_NEIGHBOURS_26 = np.ones((3, 3, 3), dtype=bool)


@dataclass
class MissionResult:
    success: bool
    sim_time_to_threshold: Optional[float]
    sim_time: float
    termination: str  # "threshold", "exhausted" or "timeout"
    timeline: list  # (tick, sim_time_s, coverage)
    metrics: list  # dict rows keyed by METRIC_COLUMNS
    decisions: list = field(default_factory=list)
    gp_log: list = field(default_factory=list)
    peak_frontiers: int = 0
    final_frontiers: int = 0
    final_coverage: float = 0.0
    false_free_max: int = 0  # mapped FREE voxels that are solid in the ground truth
    inflation_violations: int = 0  # planned waypoints within the inflation radius of OCCUPIED
    n_plans: int = 0
    distance_travelled: float = 0.0

    @property
    def n_updates(self) -> int:
        return len(self.metrics)


def build_world(cfg: MissionConfig) -> WorldModel:
    if cfg["world.file"]:
        return WorldModel.read(cfg["world.file"], cfg["map.resolution"])
    return generate_world(WorldKind(cfg["world.kind"]), (cfg["world.extent_x_m"], cfg["world.extent_y_m"]),
                          seed=cfg["world.seed"], height=cfg["world.height_m"],
                          resolution=cfg["map.resolution"])


def _us(t0: float) -> float:
    return (time.perf_counter() - t0) * 1e6


def count_inflation_violations(occ, waypoints: np.ndarray, radius: float) -> int:
    """Waypoints whose distance to some OCCUPIED voxel center is <= ``radius``."""
    occupied = np.argwhere(occ.occupied_mask())
    if occupied.shape[0] == 0 or len(waypoints) == 0 or radius <= 0:
        return 0
    centers = occ.centers_of(occupied)
    bad = 0
    for wp in np.asarray(waypoints):
        d2 = ((centers - wp) ** 2).sum(axis=1)
        bad += int(d2.min() <= radius * radius + 1e-12)
    return bad


class _Explorer:
    """Mutable per-mission state; ``run_mission`` is the public entry point."""

    def __init__(self, cfg: MissionConfig, world: WorldModel, check_safety: bool):
        self.cfg = cfg
        self.world = world
        self.check_safety = check_safety
        self.occ = world.new_map(cfg.occupancy_params())
        self.frontiers = FrontierStore(cfg["frontier.clear_radius_m"])
        self.model = cfg.sensor_model()
        self.ms = cfg.meanshift_params()
        self.gain_params = cfg.gain_params()
        self.mode = cfg.mode
        self.gp = GpWindow(cfg.gp_hyperparams()) if self.mode is Mode.ASYMP_BAYES else None
        self.rng = np.random.default_rng(cfg["mission.seed"])
        self.inflation = cfg["plan.inflation_m"]
        self.goal: Optional[np.ndarray] = None
        self.goal_pred: float = float("nan")
        self.path: Optional[Path] = None
        self.result_decisions: list = []
        self.gp_log: list = []
        self.violations = 0
        self.n_plans = 0

    # -- planning -----------------------------------------------------------

    def _mask(self) -> np.ndarray:
        return traversable_mask(self.occ, self.inflation, self.cfg["plan.allow_unknown"],
                                self.cfg["robot.z_max"])

    def _plan(self, start, goal, mask) -> Optional[Path]:
        req = PlanRequest(tuple(start), tuple(goal), self.inflation, self.cfg["plan.allow_unknown"],
                          self.cfg["robot.z_max"])
        path = plan(self.occ, req, mask)
        if path is not None:
            self.n_plans += 1
            if self.check_safety:
                self.violations += count_inflation_violations(self.occ, path.waypoints[1:], self.inflation)
        return path

    def _start_key(self, pos, mask) -> Optional[tuple]:
        k = tuple(int(v) for v in self.occ.keys_of(pos)[0])
        if self.occ.in_bounds(k)[0] and mask[k]:
            return k
        return None

    def _decide(self, pos: np.ndarray, timings: dict, tick: int) -> None:
        t0 = time.perf_counter()
        cands = cluster_candidates(self.occ, self.frontiers, self.ms, self.gain_params)
        timings["cluster"] += _us(t0)
        if not cands:
            self.goal, self.path = None, None
            return
        t0 = time.perf_counter()
        source = GainSource.GP if self.gp is not None and len(self.gp) > 0 else GainSource.DETERMINISTIC
        gains = candidate_gains(self.occ, cands, source, self.gain_params, self.gp)
        ranked = rank_candidates(cands, pos, self.gain_params, gains)
        timings["gain"] += _us(t0)

        t0 = time.perf_counter()
        mask = self._mask()
        start_key = self._start_key(pos, mask)
        if start_key is None:
            # the robot's own voxel became inflated; leave through the free space around it
            start_key = snap_to_traversable(self.occ, mask, pos, 2 * self.inflation + self.occ.resolution)
        labels = ndimage.label(mask, structure=_NEIGHBOURS_26)[0]
        reach = labels[start_key] if start_key is not None else 0
        switch = self.cfg["plan.goal_switch_m"]
        chosen = None
        for cand in ranked:
            if np.linalg.norm(cand.position - pos) <= switch:
                # already at this viewpoint; its frontiers cannot be cleared by moving closer
                self.frontiers.discard(cand.members)
                continue
            gk = self._start_key(cand.position, mask) or snap_to_traversable(
                self.occ, mask, cand.position, 2.0)
            if reach == 0 or gk is None or labels[gk] != reach:
                self.frontiers.discard(cand.members)
                continue
            if np.linalg.norm(self.occ.center_of(gk) - pos) <= switch:
                # the closest reachable vantage point is where the robot already is
                self.frontiers.discard(cand.members)
                continue
            start_pos = self.occ.center_of(start_key)
            path = self._plan(start_pos, self.occ.center_of(gk), mask)
            if path is None:
                self.frontiers.discard(cand.members)
                continue
            if self._start_key(pos, mask) is None:
                path = Path(np.vstack([pos[None, :], path.waypoints]), path.length)
            chosen = cand
            self.path = path
            break
        timings["plan"] += _us(t0)
        if chosen is None:
            self.goal, self.path = None, None
            return
        self.goal = chosen.position
        self.goal_pred = chosen.gain
        self.result_decisions.append({
            "tick": tick, "n_candidates": len(ranked),
            "chosen_x": chosen.position[0], "chosen_y": chosen.position[1], "chosen_z": chosen.position[2],
            "info_gain": chosen.gain, "score": chosen.score, "gain_source": source.value,
        })

    def _path_blocked(self, pos) -> bool:
        """True if any remaining waypoint is no longer traversable."""
        if self.path is None:
            return False
        mask = self._mask()
        keys = self.occ.keys_of(self.path.waypoints)
        ok = mask[keys[:, 0], keys[:, 1], keys[:, 2]]
        if self._start_key(pos, mask) is None and not ok[0]:
            ok = ok[1:]
        return not bool(ok.all())

    # -- main loop ----------------------------------------------------------

    def run(self) -> MissionResult:
        cfg = self.cfg
        dt = cfg["robot.tick_dt"]
        every = cfg["mission.scan_every_ticks"]
        max_ticks = int(round(cfg["mission.max_sim_time_s"] / dt))
        threshold = cfg["mission.success_threshold"]
        noise = cfg["sensor.noise_sigma_m"]
        switch = cfg["plan.goal_switch_m"]
        start = self.world.default_start(cfg["robot.start_altitude"], clearance=max(self.inflation, 0.4))
        state = RobotState(tuple(start), cfg["robot.v_max"], dt)
        yaw = 0.0
        timeline, metrics = [], []
        peak = 0
        false_free = 0
        t_hit: Optional[float] = None
        termination = "timeout"
        travelled = 0.0
        tick = 0
        while True:
            if tick % every == 0:
                pos = np.asarray(state.position)
                pose = SensorPose(pos, yaw)
                feats = None
                if self.gp is not None:
                    feats = self.occ.count_states_in_box(pos, self.gain_params.cube_half_edge)
                scan = simulate_scan(self.world, self.model, pose, noise, self.rng)
                report = process_scan(self.occ, self.frontiers, self.model, scan)
                timings = {"cluster": 0.0, "gain": 0.0, "plan": 0.0}
                if self.gp is not None:
                    t0 = time.perf_counter()
                    self.gp.observe(feats, report.info_gain)
                    timings["gain"] += _us(t0)
                    self.gp_log.append({"tick": tick, "n_free": feats[0], "n_occupied": feats[1],
                                        "n_unknown": feats[2], "observed_gain": report.info_gain,
                                        "predicted_gain": self.goal_pred})
                cov = coverage(self.world, self.occ)
                peak = max(peak, len(self.frontiers))
                if self.check_safety:
                    false_free = max(false_free, int(np.count_nonzero(self.occ.free_mask() & self.world.raster)))
                now = round(tick * dt, 9)
                timeline.append((tick, now, cov))
                if cov >= threshold and t_hit is None:
                    t_hit = now

                need = (self.goal is None or self.path is None
                        or np.linalg.norm(pos - self.goal) <= switch or self._path_blocked(pos))
                if need and not (cov >= threshold and cfg["mission.stop_at_threshold"]):
                    self._decide(pos, timings, tick)

                tu = report.timings_us
                row = {
                    "tick": tick, "sim_time_s": now, "coverage_pct": 100.0 * cov,
                    "n_frontiers": len(self.frontiers), "entropy_bits": report.entropy_after,
                    "info_gain_bits": report.info_gain,
                    "t_map_us": tu["entropy_before"] + tu["insert"] + tu["free_space"] + tu["entropy_after"],
                    "t_frontier_us": tu["frontier_insert"] + tu["frontier_correct"],
                    "t_cluster_us": int(round(timings["cluster"])), "t_gain_us": int(round(timings["gain"])),
                    "t_plan_us": int(round(timings["plan"])),
                    "chosen_x": self.goal[0] if self.goal is not None else float("nan"),
                    "chosen_y": self.goal[1] if self.goal is not None else float("nan"),
                    "chosen_z": self.goal[2] if self.goal is not None else float("nan"),
                }
                metrics.append(row)
                if cov >= threshold and cfg["mission.stop_at_threshold"]:
                    termination = "threshold"
                    break
                if self.goal is None and len(self.frontiers) == 0:
                    termination = "exhausted"
                    break
                if self.goal is None:
                    # frontiers remain but none is reachable now; they were all discarded
                    termination = "exhausted"
                    break
            if tick >= max_ticks:
                break
            if self.path is not None:
                prev = np.asarray(state.position)
                state = step_robot(state, self.path)
                travelled += float(np.linalg.norm(np.asarray(state.position) - prev))
                wp = self.path.waypoints[state.reached:]
                self.path = Path(wp, self.path.length) if len(wp) else None
                d = np.asarray(state.position) - prev
                if np.hypot(d[0], d[1]) > 1e-9:
                    yaw = math.atan2(d[1], d[0])
            else:
                state = RobotState(state.position, state.v_max, dt, state.sim_time + dt)
            tick += 1

        final_cov = timeline[-1][2] if timeline else 0.0
        max_t = cfg["mission.max_sim_time_s"]
        success = t_hit is not None and t_hit <= max_t and max_t > 0
        return MissionResult(
            success=success, sim_time_to_threshold=t_hit if success else None, sim_time=round(tick * dt, 9),
            termination=termination, timeline=timeline, metrics=metrics, decisions=self.result_decisions,
            gp_log=self.gp_log, peak_frontiers=peak, final_frontiers=len(self.frontiers),
            final_coverage=final_cov, false_free_max=false_free, inflation_violations=self.violations,
            n_plans=self.n_plans, distance_travelled=travelled,
        )


def run_mission(cfg: MissionConfig, world: Optional[WorldModel] = None,
                check_safety: bool = False) -> MissionResult:
    """Run one exploration mission; deterministic for a given config and world."""
    world = world if world is not None else build_world(cfg)
    return _Explorer(cfg, world, check_safety).run()


def bucket_by_coverage(timeline, step: float = 0.05) -> dict:
    """First sim time at which each coverage level ``k * step`` was reached.

    Buckets are left-closed: level ``c`` is reached once coverage >= ``c``.
    """
    out = {}
    n = int(round(1.0 / step))
    for k in range(1, n + 1):
        level = round(k * step, 10)
        for _, t, cov in timeline:
            if cov >= level - 1e-12:
                out[level] = t
                break
    return out


def _write_rows(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if isinstance(v, float) and math.isnan(v) else v) for k, v in r.items()})


def write_metrics(path, result: MissionResult) -> None:
    _write_rows(path, METRIC_COLUMNS, result.metrics)


def write_decisions(path, result: MissionResult) -> None:
    _write_rows(path, DECISION_COLUMNS, result.decisions)


def write_gp_log(path, result: MissionResult) -> None:
    _write_rows(path, GP_COLUMNS, result.gp_log)


def compare_modes(cfg: MissionConfig, n_seeds: int, modes=(Mode.ASYMP, Mode.ASYMP_BAYES),
                  check_safety: bool = False):
    """Run every mode on ``n_seeds`` seeded worlds.

    Returns ``(summary_rows, per_seed)`` where ``per_seed[mode]`` lists the
    :class:`MissionResult` of each seed in order.
    """
    if n_seeds < 2:
        raise ValueError("n_seeds must be >= 2")
    base_world, base_mission = cfg["world.seed"], cfg["mission.seed"]
    per_seed = {m: [] for m in modes}
    for i in range(n_seeds):
        wcfg = cfg.with_(world__seed=base_world + i, mission__seed=base_mission + i)
        world = build_world(wcfg)
        for m in modes:
            per_seed[m].append(run_mission(wcfg.with_(mission__mode=m.value), world, check_safety))
    rows = []
    for m in modes:
        res = per_seed[m]
        cols = {
            "success_rate": [float(r.success) for r in res],
            "sim_time_to_threshold_s": [r.sim_time_to_threshold if r.success else r.sim_time for r in res],
            "final_coverage": [r.final_coverage for r in res],
            "distance_m": [r.distance_travelled for r in res],
            "mean_update_us": [float(np.mean([row["t_map_us"] + row["t_frontier_us"] for row in r.metrics]))
                               for r in res],
        }
        for name, vals in cols.items():
            a = np.asarray(vals, dtype=np.float64)
            rows.append({"mode": m.value, "metric": name, "mean": float(a.mean()),
                         "std": float(a.std(ddof=1)) if a.size > 1 else 0.0, "n": int(a.size)})
    return rows, per_seed


def write_summary(path, rows) -> None:
    _write_rows(path, SUMMARY_COLUMNS, rows)
