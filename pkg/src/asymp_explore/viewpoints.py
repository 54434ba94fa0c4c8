"""Frontier clustering into candidate viewpoints and best-viewpoint selection."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .frontiers import FrontierStore
from .occupancy import OccupancyOctree, OccupancyState


class GainMode(enum.Enum):
    AS_PRINTED = "as_printed"
    ATTENUATING = "attenuating"


class GainSource(enum.Enum):
    DETERMINISTIC = "deterministic"
    GP = "gp"


@dataclass(frozen=True)
class MeanShiftParams:
    bandwidth: float = 2.0
    convergence_eps: float = 1e-3
    max_iters: int = 100
    merge_radius: float = 1.0

    def __post_init__(self):
        if self.bandwidth <= 0 or self.merge_radius <= 0:
            raise ValueError("bandwidth and merge_radius must be positive")


@dataclass(frozen=True)
class GainParams:
    lambda_g: float = 0.5
    cube_half_edge: float = 2.5
    gain_mode: GainMode = GainMode.ATTENUATING

    def __post_init__(self):
        if self.lambda_g < 0 or self.cube_half_edge <= 0:
            raise ValueError("lambda_g must be >= 0 and cube_half_edge > 0")


@dataclass
class CandidateViewpoint:
    position: np.ndarray
    cluster_size: int
    features: tuple = (0, 0, 0)
    gain: float = 0.0
    score: float = 0.0
    members: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.int64), repr=False)


def _shift(modes: np.ndarray, data: np.ndarray, inv_two_h2: float, chunk: int = 2048) -> np.ndarray:
    out = np.empty_like(modes)
    dn = np.einsum("ij,ij->i", data, data)
    for s in range(0, modes.shape[0], chunk):
        y = modes[s:s + chunk]
        d2 = np.einsum("ij,ij->i", y, y)[:, None] + dn[None, :] - 2.0 * (y @ data.T)
        w = np.exp(-np.maximum(d2, 0.0) * inv_two_h2)
        out[s:s + chunk] = (w @ data) / w.sum(axis=1, keepdims=True)
    return out


def mean_shift_modes(points, params: MeanShiftParams, return_history: bool = False):
    """Iterate every point to its mode under a Gaussian kernel.

    Returns the ``(N, 3)`` converged modes; with ``return_history`` also the
    per-iteration shift norms of each point (``nan`` once converged).
    """
    data = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    modes = data.copy()
    history = []
    active = np.arange(data.shape[0])
    inv = 1.0 / (2.0 * params.bandwidth ** 2)
    for _ in range(params.max_iters):
        if active.size == 0:
            break
        new = _shift(modes[active], data, inv)
        shift = np.linalg.norm(new - modes[active], axis=1)
        modes[active] = new
        if return_history:
            row = np.full(data.shape[0], np.nan)
            row[active] = shift
            history.append(row)
        active = active[shift >= params.convergence_eps]
    if return_history:
        return modes, np.array(history)
    return modes


def mean_shift(points, params: MeanShiftParams = MeanShiftParams(), return_labels: bool = False):
    """Cluster centers of ``points``; modes closer than ``merge_radius`` are merged.

    Each center is the mean of the modes merged into it, so it stays inside
    the convex hull of the input.
    """
    data = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if data.shape[0] == 0:
        return (np.zeros((0, 3)), np.zeros(0, dtype=np.int64)) if return_labels else np.zeros((0, 3))
    modes = mean_shift_modes(data, params)
    r2 = params.merge_radius ** 2
    labels = np.full(data.shape[0], -1, dtype=np.int64)
    anchors = []
    for i, m in enumerate(modes):
        if anchors:
            d2 = ((np.asarray(anchors) - m) ** 2).sum(axis=1)
            j = int(np.argmin(d2))
            if d2[j] <= r2:
                labels[i] = j
                continue
        labels[i] = len(anchors)
        anchors.append(m)
    centers = np.array([modes[labels == j].mean(axis=0) for j in range(len(anchors))])
    if return_labels:
        return centers, labels
    return centers


def deterministic_gain(occ: OccupancyOctree, v_c, params: GainParams) -> int:
    """Number of UNKNOWN voxels in the gain cube around ``v_c``."""
    return occ.count_states_in_box(v_c, params.cube_half_edge)[2]


def exploration_gain(info: float, robot_pos, v_c, params: GainParams) -> float:
    if info < 0:
        raise ValueError("information gain must be non-negative")
    return _gain(info, float(np.linalg.norm(np.asarray(robot_pos, float) - np.asarray(v_c, float))),
                 params)


def _gain(info: float, dist: float, params: GainParams) -> float:
    if params.gain_mode is GainMode.AS_PRINTED:
        return info / math.exp(-params.lambda_g * dist)
    return info * math.exp(-params.lambda_g * dist)


def project_to_free(occ: OccupancyOctree, position, radius: float = 2.0) -> Optional[np.ndarray]:
    """Nearest FREE voxel center within ``radius`` of ``position``, or None."""
    lo, hi = occ.box_index_range(position, radius)
    sl = tuple(slice(int(a), int(b)) for a, b in zip(lo, hi))
    free = occ.free_mask()[sl]
    if not free.any():
        return None
    keys = np.argwhere(free) + lo
    centers = occ.centers_of(keys)
    d2 = ((centers - np.asarray(position)) ** 2).sum(axis=1)
    ok = d2 <= radius * radius + 1e-12
    if not ok.any():
        return None
    i = int(np.flatnonzero(ok)[np.argmin(d2[ok])])
    return centers[i]


def cluster_candidates(occ: OccupancyOctree, frontiers: FrontierStore,
                       ms_params: MeanShiftParams, gain_params: GainParams) -> list:
    """Mean-shift the frontier snapshot into valid candidate viewpoints with features."""
    keys = frontiers.snapshot_keys()
    if keys.shape[0] == 0:
        return []
    points = occ.centers_of(keys)
    centers, labels = mean_shift(points, ms_params, return_labels=True)
    out = []
    for j, c in enumerate(centers):
        pos = c
        k = occ.keys_of(c)[0]
        if occ.in_bounds(k)[0] and occ.state_of(k) is OccupancyState.OCCUPIED:
            pos = project_to_free(occ, c)
            if pos is None:
                continue
        members = keys[labels == j]
        feats = occ.count_states_in_box(pos, gain_params.cube_half_edge)
        out.append(CandidateViewpoint(np.asarray(pos, dtype=np.float64), int(members.shape[0]),
                                      feats, members=members))
    return out


def rank_candidates(candidates: list, robot_pos, gain_params: GainParams, gains) -> list:
    """Score candidates with the exploration gain and sort best first.

    Ties go to the nearer candidate, then to the lexicographically smaller position.
    """
    robot = np.asarray(robot_pos, dtype=np.float64)
    keyed = []
    for cand, info in zip(candidates, gains):
        dist = float(np.linalg.norm(cand.position - robot))
        cand.gain = float(info)
        cand.score = _gain(float(info), dist, gain_params)
        keyed.append(((-cand.score, dist, tuple(cand.position.tolist())), cand))
    keyed.sort(key=lambda kv: kv[0])
    return [c for _, c in keyed]


def candidate_gains(occ: OccupancyOctree, candidates: list, source: GainSource,
                    gain_params: GainParams, gp=None) -> np.ndarray:
    if source is GainSource.GP:
        if gp is None:
            raise ValueError("GP gain source requires a regressor")
        return gp.predict_many([c.features for c in candidates])
    return np.array([c.features[2] for c in candidates], dtype=np.float64)


def select_best(occ: OccupancyOctree, frontiers: FrontierStore, robot_pos,
                gain_source: GainSource = GainSource.DETERMINISTIC,
                ms_params: MeanShiftParams = MeanShiftParams(),
                gain_params: GainParams = GainParams(), gp=None) -> Optional[CandidateViewpoint]:
    """Best candidate viewpoint, or None when there are no frontiers."""
    cands = cluster_candidates(occ, frontiers, ms_params, gain_params)
    if not cands:
        return None
    gains = candidate_gains(occ, cands, gain_source, gain_params, gp)
    return rank_candidates(cands, robot_pos, gain_params, gains)[0]
