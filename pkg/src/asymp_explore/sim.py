"""Ground-truth worlds, simulated range scans and kinematic robot motion."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from pathlib import Path as FsPath
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .occupancy import OccupancyOctree, OccupancyParams
from .planner import Path
from .sensor import SensorModel, SensorPose
from .traversal import segment_keys
from .updater import ScanInput

FOREST_DENSITY = 0.05  # trees per m^2
Z_MAX = 3.0


class WorldKind(enum.Enum):
    FOREST = "forest"
    WAREHOUSE = "warehouse"
    ROOM = "room"


class PoseInObstacleError(ValueError):
    pass


@dataclass(frozen=True)
class Box:
    center: tuple
    half: tuple

    def contains(self, p: np.ndarray) -> np.ndarray:
        c, h = np.asarray(self.center), np.asarray(self.half)
        return np.all(np.abs(p - c) <= h, axis=-1)


@dataclass(frozen=True)
class Cylinder:
    cx: float
    cy: float
    radius: float
    z0: float
    z1: float

    def contains(self, p: np.ndarray) -> np.ndarray:
        r2 = (p[..., 0] - self.cx) ** 2 + (p[..., 1] - self.cy) ** 2
        return (r2 <= self.radius ** 2) & (p[..., 2] >= self.z0) & (p[..., 2] <= self.z1)


class WorldModel:
    """Analytic primitives over a bounded volume, rasterized at map resolution.

    Everything below ``ground_z`` is solid ground.
    """

    def __init__(self, bounds_min, bounds_max, primitives: Sequence = (),
                 resolution: float = 0.4, ground_z: float = 0.0, kind: str = "custom"):
        self.bounds_min = np.asarray(bounds_min, dtype=np.float64)
        self.bounds_max = np.asarray(bounds_max, dtype=np.float64)
        if not (np.all(np.isfinite(self.bounds_min)) and np.all(np.isfinite(self.bounds_max))):
            raise ValueError("world bounds must be finite")
        self.primitives = list(primitives)
        self.resolution = float(resolution)
        self.ground_z = float(ground_z)
        self.kind = kind
        grid = OccupancyOctree(self.bounds_min, self.bounds_max, self.resolution)
        self.shape = grid.shape
        idx = np.indices(self.shape).reshape(3, -1).T
        centers = grid.centers_of(idx)
        self.raster = self.solid_at(centers).reshape(self.shape)
        self._observable = None

    def solid_at(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        solid = p[..., 2] < self.ground_z
        for prim in self.primitives:
            solid = solid | prim.contains(p)
        return solid

    def new_map(self, params: Optional[OccupancyParams] = None) -> OccupancyOctree:
        return OccupancyOctree(self.bounds_min, self.bounds_max, self.resolution, params)

    def key_of(self, point) -> tuple:
        return tuple(int(v) for v in np.floor((np.asarray(point) - self.bounds_min) / self.resolution))

    def in_bounds_key(self, key) -> bool:
        return all(0 <= key[i] < self.shape[i] for i in range(3))

    def is_free(self, point) -> bool:
        k = self.key_of(point)
        return self.in_bounds_key(k) and not self.raster[k]

    @property
    def observable(self) -> np.ndarray:
        """Free voxels plus solid voxels with at least one free face neighbour."""
        if self._observable is None:
            free = ~self.raster
            face = ndimage.generate_binary_structure(3, 1)
            near_free = ndimage.binary_dilation(free, structure=face)
            self._observable = free | (self.raster & near_free)
        return self._observable

    def default_start(self, altitude: float = 1.0, clearance: float = 1.0) -> np.ndarray:
        """Free point nearest the horizontal center at ``altitude`` with clearance."""
        center = 0.5 * (self.bounds_min + self.bounds_max)
        target = np.array([center[0], center[1], altitude])
        res = self.resolution
        solid = self.raster
        r = int(math.ceil(clearance / res))
        g = np.arange(-r, r + 1)
        ball = (g[:, None, None] ** 2 + g[None, :, None] ** 2 + g[None, None, :] ** 2) * res * res \
            <= clearance ** 2 + 1e-9
        blocked = ndimage.binary_dilation(solid, structure=ball)
        keys = np.argwhere(~blocked)
        if keys.shape[0] == 0:
            raise ValueError("world has no free start position")
        centers = self.bounds_min + (keys + 0.5) * res
        i = int(np.argmin(((centers - target) ** 2).sum(axis=1)))
        return centers[i]

    # -- file format --------------------------------------------------------

    def to_text(self) -> str:
        lines = ["bounds " + " ".join(f"{v:g}" for v in (*self.bounds_min, *self.bounds_max))]
        for p in self.primitives:
            if isinstance(p, Box):
                lines.append("box " + " ".join(f"{v:.6g}" for v in (*p.center, *p.half)))
            else:
                lines.append("cyl " + " ".join(f"{v:.6g}" for v in (p.cx, p.cy, p.radius, p.z0, p.z1)))
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        FsPath(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str, resolution: float = 0.4, kind: str = "custom") -> "WorldModel":
        bounds = None
        prims = []
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tag, *vals = line.split()
            try:
                nums = [float(v) for v in vals]
            except ValueError as e:
                raise ValueError(f"line {n}: non-numeric value in {raw!r}") from e
            expected = {"bounds": 6, "box": 6, "cyl": 5}
            if tag not in expected:
                raise ValueError(f"line {n}: unknown primitive {tag!r}")
            if len(nums) != expected[tag]:
                raise ValueError(f"line {n}: {tag} takes {expected[tag]} values, got {len(nums)}")
            if tag == "bounds":
                bounds = (nums[:3], nums[3:])
            elif tag == "box":
                prims.append(Box(tuple(nums[:3]), tuple(nums[3:])))
            else:
                prims.append(Cylinder(*nums))
        if bounds is None:
            raise ValueError("world file has no bounds line")
        return cls(bounds[0], bounds[1], prims, resolution, kind=kind)

    @classmethod
    def read(cls, path, resolution: float = 0.4) -> "WorldModel":
        return cls.from_text(FsPath(path).read_text(), resolution)


def generate_world(kind, extent=(20.0, 20.0), seed: int = 0, height: float = 4.0,
                   resolution: float = 0.4) -> WorldModel:
    """Seeded Forest, Warehouse or Room world of horizontal ``extent`` (meters)."""
    kind = WorldKind(kind) if not isinstance(kind, WorldKind) else kind
    sx, sy = (float(extent), float(extent)) if np.isscalar(extent) else map(float, extent)
    if sx <= 0 or sy <= 0:
        raise ValueError("extent must be positive")
    rng = np.random.default_rng(seed)
    lo = (0.0, 0.0, -resolution)
    hi = (sx, sy, height)
    prims: list = []
    cx, cy = sx / 2, sy / 2

    def walls(t=0.4):
        return [
            Box((sx / 2, t / 2, height / 2), (sx / 2, t / 2, height / 2)),
            Box((sx / 2, sy - t / 2, height / 2), (sx / 2, t / 2, height / 2)),
            Box((t / 2, sy / 2, height / 2), (t / 2, sy / 2, height / 2)),
            Box((sx - t / 2, sy / 2, height / 2), (t / 2, sy / 2, height / 2)),
        ]

    if kind is WorldKind.ROOM:
        prims += walls()
    elif kind is WorldKind.WAREHOUSE:
        prims += walls()
        shelf_x, shelf_y, aisle = 1.2, 4.0, 2.4
        x = 2.0
        while x + shelf_x <= sx - 2.0:
            y = 2.0
            while y + shelf_y <= sy - 2.0:
                sc = (x + shelf_x / 2, y + shelf_y / 2)
                if math.hypot(sc[0] - cx, sc[1] - cy) > 3.0:
                    h = float(rng.uniform(1.6, 2.8))
                    prims.append(Box((sc[0], sc[1], h / 2), (shelf_x / 2, shelf_y / 2, h / 2)))
                y += shelf_y + aisle
            x += shelf_x + aisle
    else:
        n_target = int(rng.poisson(FOREST_DENSITY * sx * sy))
        placed: list = []
        attempts = 0
        while len(placed) < n_target and attempts < 200 * max(n_target, 1):
            attempts += 1
            p = rng.uniform((0.5, 0.5), (sx - 0.5, sy - 0.5))
            if math.hypot(p[0] - cx, p[1] - cy) < 2.0:
                continue
            if any(math.hypot(p[0] - q[0], p[1] - q[1]) < 1.5 for q in placed):
                continue
            placed.append(p)
        for p in placed:
            r = float(rng.uniform(0.15, 0.4))
            prims.append(Cylinder(float(p[0]), float(p[1]), r, 0.0, height))
    return WorldModel(lo, hi, prims, resolution, kind=kind.value)


def simulate_scan(world: WorldModel, model: SensorModel, pose: SensorPose,
                  noise_sigma: float = 0.0, rng: Optional[np.random.Generator] = None) -> ScanInput:
    """Cast the model's rays against the raster; one point per ray that hits.

    The hit point sits a quarter voxel (or half the chord, if shorter) inside
    the first solid voxel along the ray.
    """
    origins, dirs = model.rays_from(pose)
    o = np.asarray(pose.position, dtype=np.float64)
    start_key = world.key_of(o)
    if not world.in_bounds_key(start_key):
        raise PoseInObstacleError(f"pose {tuple(o)} outside the world")
    if world.raster[start_key]:
        raise PoseInObstacleError(f"pose {tuple(o)} inside an obstacle")
    R = model.max_range
    keys, counts, t_enter = segment_keys(origins, origins + dirs * R, world.bounds_min, world.resolution)
    shape = np.asarray(world.shape)
    cols = np.arange(keys.shape[1])[None, :]
    valid = (cols < counts[:, None]) & np.all((keys >= 0) & (keys < shape), axis=-1)
    # truncate each ray at its first out-of-bounds voxel
    valid = np.cumprod(valid, axis=1).astype(bool)
    safe = np.where(valid[..., None], keys, 0)
    solid = world.raster[safe[..., 0], safe[..., 1], safe[..., 2]] & valid
    hit = solid.any(axis=1)
    col = solid.argmax(axis=1)[hit]
    rows = np.flatnonzero(hit)
    t_in = t_enter[rows, col]
    nxt = np.minimum(col + 1, keys.shape[1] - 1)
    t_out = np.where(col + 1 < counts[rows], t_enter[rows, nxt], 1.0)
    t_out = np.where(np.isfinite(t_out), t_out, 1.0)
    dist = t_in * R + np.minimum(world.resolution / 4, 0.5 * (t_out - t_in) * R)
    if noise_sigma > 0:
        rng = rng or np.random.default_rng(0)
        dist = np.clip(dist + rng.normal(0.0, noise_sigma, dist.shape), 1e-6, R)
        pts = o + dirs[rows] * dist[:, None]
        eps = 1e-6
        return ScanInput(np.clip(pts, world.bounds_min + eps, world.bounds_max - eps), pose)
    pts = o + dirs[rows] * dist[:, None]
    hit_keys = keys[rows, col]
    return ScanInput(_settle_hits(world, o, pts, hit_keys), pose)


def _settle_hits(world: WorldModel, o: np.ndarray, pts: np.ndarray, hit_keys: np.ndarray,
                 max_rounds: int = 8) -> np.ndarray:
    """Move each hit point so the walk ``o -> point`` ends in its first solid voxel.

    The mapper re-traverses the shorter segment ``o -> point``; when the ray
    grazes a voxel edge, rounding can make that walk clip a solid voxel the
    full-range ray skipped (or miss the intended one). Such points are moved
    into the first solid voxel of the re-walk until the two agree.
    """
    pts = pts.copy()
    res = world.resolution
    todo = np.arange(pts.shape[0])
    for _ in range(max_rounds):
        if todo.size == 0:
            return pts
        keys, counts, t_enter = segment_keys(np.broadcast_to(o, (todo.size, 3)), pts[todo],
                                             world.bounds_min, res)
        cols = np.arange(keys.shape[1])[None, :]
        valid = cols < counts[:, None]
        safe = np.clip(keys, 0, np.asarray(world.shape) - 1)
        solid = world.raster[safe[..., 0], safe[..., 1], safe[..., 2]] & valid
        first = np.where(solid.any(axis=1), solid.argmax(axis=1), -1)
        ok = first == counts - 1
        bad = np.flatnonzero(~ok)
        if bad.size == 0:
            return pts
        rows = todo[bad]
        for r, i in zip(rows, bad):
            if first[i] >= 0:
                hit_keys[r] = keys[i, first[i]]
            # aim at the center of the intended solid voxel's chord along o -> center
            pts[r] = world.bounds_min + (hit_keys[r] + 0.5) * res
        todo = rows
    raise RuntimeError("could not place scan points consistently with the map traversal")


@dataclass(frozen=True)
class RobotState:
    position: tuple
    v_max: float = 1.0
    tick_dt: float = 0.1
    sim_time: float = 0.0
    reached: int = 0  # waypoints of the last followed path already passed

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))


def step_robot(state: RobotState, path: Path) -> RobotState:
    """Advance ``v_max * tick_dt`` along ``position -> path.waypoints``.

    ``reached`` in the result counts how many of ``path.waypoints`` were passed.
    """
    if len(path.waypoints) == 0:
        raise ValueError("path must be nonempty")
    budget = state.v_max * state.tick_dt
    pos = np.asarray(state.position, dtype=np.float64)
    reached = 0
    for wp in np.asarray(path.waypoints, dtype=np.float64):
        seg = wp - pos
        d = float(np.linalg.norm(seg))
        if d <= budget:
            budget -= d
            pos = wp
            reached += 1
            continue
        pos = pos + seg * (budget / d)
        break
    return replace(state, position=tuple(pos), sim_time=state.sim_time + state.tick_dt, reached=reached)


def coverage(world: WorldModel, occ: OccupancyOctree) -> float:
    """Fraction of observable ground-truth voxels that are known in ``occ``."""
    obs = world.observable
    total = int(np.count_nonzero(obs))
    if total == 0:
        return 1.0
    return int(np.count_nonzero(occ.known & obs)) / total
