"""Fixed ray-bundle sensor model shared by simulated scanning and the forward model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .occupancy import EmptyRayError

DEG = math.pi / 180.0


def _step_count(span: float, step: float) -> int:
    if step <= 0:
        raise ValueError("angular step must be positive")
    return int(math.floor(span / step + 1e-9)) + 1


@dataclass(frozen=True)
class SensorPose:
    position: tuple
    yaw: float = 0.0

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        if not all(math.isfinite(v) for v in pos):
            raise ValueError("pose position must be finite")
        object.__setattr__(self, "position", pos)
        # wrap into [-pi, pi)
        object.__setattr__(self, "yaw", (float(self.yaw) + math.pi) % (2 * math.pi) - math.pi)


@dataclass(frozen=True)
class SensorModel:
    """Azimuth/elevation grid of unit directions with a range limit.

    Elevations are symmetric about the horizontal plane, starting at
    ``-el_span/2``; azimuths start at 0 (the +x reference direction).
    """

    max_range: float = 20.0
    az_span: float = 2 * math.pi
    el_span: float = 0.59
    az_step: float = 1.0 * DEG
    el_step: float = 1.0 * DEG
    directions: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")
        n_az = _step_count(self.az_span, self.az_step)
        n_el = _step_count(self.el_span, self.el_step)
        az = np.arange(n_az) * self.az_step
        el = -0.5 * self.el_span + np.arange(n_el) * self.el_step
        a, e = np.meshgrid(az, el, indexing="ij")
        d = np.stack([np.cos(e) * np.cos(a), np.cos(e) * np.sin(a), np.sin(e)], axis=-1).reshape(-1, 3)
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        d.setflags(write=False)
        object.__setattr__(self, "directions", d)

    @classmethod
    def coarse(cls, max_range: float = 5.0) -> "SensorModel":
        """5 degree grid for fast desk-scale runs."""
        return cls(max_range=max_range, az_step=5.0 * DEG, el_step=5.0 * DEG)

    @property
    def n_rays(self) -> int:
        return self.directions.shape[0]

    def world_directions(self, yaw: float) -> np.ndarray:
        c, s = math.cos(yaw), math.sin(yaw)
        d = self.directions
        out = np.empty_like(d)
        out[:, 0] = c * d[:, 0] - s * d[:, 1]
        out[:, 1] = s * d[:, 0] + c * d[:, 1]
        out[:, 2] = d[:, 2]
        return out

    def rays_from(self, pose: SensorPose):
        """``(origins, directions)`` arrays of shape ``(n_rays, 3)``."""
        dirs = self.world_directions(pose.yaw)
        origins = np.broadcast_to(np.asarray(pose.position, dtype=np.float64), dirs.shape)
        return origins, dirs

    def ray_ends(self, pose: SensorPose) -> np.ndarray:
        origins, dirs = self.rays_from(pose)
        return origins + dirs * self.max_range


def point_behind(ray_origin, ray_end, resolution: float) -> np.ndarray:
    """The point one ``resolution`` past ``ray_end`` along the ray."""
    o = np.asarray(ray_origin, dtype=np.float64)
    e = np.asarray(ray_end, dtype=np.float64)
    d = e - o
    n = np.linalg.norm(d)
    if n == 0.0:
        raise EmptyRayError("zero-length ray")
    return e + d / n * resolution


def points_behind(ray_origins, ray_ends, resolution: float) -> np.ndarray:
    o = np.atleast_2d(np.asarray(ray_origins, dtype=np.float64))
    e = np.atleast_2d(np.asarray(ray_ends, dtype=np.float64))
    d = e - o
    n = np.linalg.norm(d, axis=1, keepdims=True)
    if np.any(n == 0.0):
        raise EmptyRayError("zero-length ray")
    return e + d / n * resolution
