"""Flat ``key = value`` mission configuration with namespaced keys."""

from __future__ import annotations

import enum
import math
from pathlib import Path
from typing import Any, Mapping

from .gp import GpHyperparams
from .occupancy import OccupancyParams
from .sensor import DEG, SensorModel
from .viewpoints import GainMode, GainParams, MeanShiftParams


class ConfigError(ValueError):
    pass


class Mode(enum.Enum):
    ASYMP = "asymp"
    ASYMP_BAYES = "asymp_bayes"


DEFAULTS: dict = {
    "map.resolution": 0.4,
    "map.p_hit": 0.7,
    "map.p_miss": 0.4,
    "map.p_min": 0.12,
    "map.p_max": 0.971,
    "map.threshold": 0.5,
    # desk-scale sensor: 5 degree grid, short range
    "sensor.max_range_m": 5.0,
    "sensor.az_span_rad": 2 * math.pi,
    "sensor.el_span_rad": 0.59,
    "sensor.az_step_rad": 5.0 * DEG,
    "sensor.el_step_rad": 5.0 * DEG,
    "sensor.noise_sigma_m": 0.0,
    "frontier.clear_radius_m": 1.0,
    "meanshift.bandwidth_m": 2.0,
    "meanshift.eps_m": 1e-3,
    "meanshift.max_iters": 100,
    "meanshift.merge_radius_m": 1.0,
    "gain.lambda_g": 0.5,
    "gain.cube_half_edge_m": 2.5,
    "gain.mode": "attenuating",
    "gp.sigma_f2": 1.0,
    "gp.length_scale": 0.3,
    "gp.sigma_n2": 0.01,
    "gp.window": 200,
    "plan.inflation_m": 0.6,
    "plan.allow_unknown": False,
    "plan.goal_switch_m": 1.5,
    "robot.v_max": 1.0,
    "robot.tick_dt": 0.1,
    "robot.z_max": 3.0,
    "robot.start_altitude": 1.0,
    "mission.mode": "asymp",
    "mission.success_threshold": 0.90,
    "mission.max_sim_time_s": 1000.0,
    "mission.scan_every_ticks": 10,
    "mission.stop_at_threshold": True,
    "mission.seed": 0,
    "world.kind": "forest",
    "world.extent_x_m": 20.0,
    "world.extent_y_m": 20.0,
    "world.height_m": 4.0,
    "world.seed": 0,
    "world.file": "",
}


def _coerce(key: str, raw: Any) -> Any:
    default = DEFAULTS[key]
    if isinstance(default, bool):
        if isinstance(raw, bool):
            return raw
        s = str(raw).strip().lower()
        if s in ("true", "1", "yes", "on"):
            return True
        if s in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        try:
            return int(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if isinstance(default, float):
        try:
            return float(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    return str(raw).strip()


class MissionConfig:
    """Typed view over the flat key table; unknown keys are rejected."""

    def __init__(self, overrides: Mapping[str, Any] | None = None, **kw):
        self.values = dict(DEFAULTS)
        self.update(overrides or {})
        self.update({k.replace("__", "."): v for k, v in kw.items()})
        self.validate()

    def update(self, overrides: Mapping[str, Any]) -> "MissionConfig":
        for key, raw in overrides.items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            self.values[key] = _coerce(key, raw)
        return self

    def with_(self, **overrides) -> "MissionConfig":
        vals = dict(self.values)
        vals.update({k.replace("__", "."): v for k, v in overrides.items()})
        return MissionConfig(vals)

    def __getitem__(self, key: str):
        return self.values[key]

    def validate(self) -> None:
        v = self.values
        thr = v["mission.success_threshold"]
        if not 0 < thr <= 1:
            raise ConfigError(f"mission.success_threshold: must lie in (0, 1], got {thr}")
        if v["mission.max_sim_time_s"] < 0:
            raise ConfigError("mission.max_sim_time_s: must be non-negative")
        if v["mission.scan_every_ticks"] < 1:
            raise ConfigError("mission.scan_every_ticks: must be >= 1")
        for key, enum_cls in (("mission.mode", Mode), ("gain.mode", GainMode)):
            try:
                enum_cls(v[key])
            except ValueError:
                choices = ", ".join(m.value for m in enum_cls)
                raise ConfigError(f"{key}: expected one of {choices}, got {v[key]!r}") from None
        if v["world.file"] and not Path(v["world.file"]).is_file():
            raise ConfigError(f"world.file: no such file {v['world.file']!r}")

    @classmethod
    def from_text(cls, text: str) -> "MissionConfig":
        pairs = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {n}: expected 'key = value', got {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            pairs[key] = val
        return cls(pairs)

    @classmethod
    def from_file(cls, path) -> "MissionConfig":
        return cls.from_text(Path(path).read_text())

    def to_text(self) -> str:
        return "".join(f"{k} = {str(v).lower() if isinstance(v, bool) else v}\n"
                       for k, v in self.values.items())

    # -- typed groups -------------------------------------------------------

    @property
    def mode(self) -> Mode:
        return Mode(self.values["mission.mode"])

    def occupancy_params(self) -> OccupancyParams:
        v = self.values
        return OccupancyParams(v["map.p_hit"], v["map.p_miss"], v["map.p_min"], v["map.p_max"],
                               v["map.threshold"])

    def sensor_model(self) -> SensorModel:
        v = self.values
        return SensorModel(v["sensor.max_range_m"], v["sensor.az_span_rad"], v["sensor.el_span_rad"],
                           v["sensor.az_step_rad"], v["sensor.el_step_rad"])

    def meanshift_params(self) -> MeanShiftParams:
        v = self.values
        return MeanShiftParams(v["meanshift.bandwidth_m"], v["meanshift.eps_m"],
                               v["meanshift.max_iters"], v["meanshift.merge_radius_m"])

    def gain_params(self) -> GainParams:
        v = self.values
        return GainParams(v["gain.lambda_g"], v["gain.cube_half_edge_m"], GainMode(v["gain.mode"]))

    def gp_hyperparams(self) -> GpHyperparams:
        v = self.values
        return GpHyperparams(v["gp.sigma_f2"], v["gp.length_scale"], v["gp.sigma_n2"], v["gp.window"])
