"""Headless 3D autonomous exploration with incremental frontier maintenance."""

from .config import ConfigError, MissionConfig, Mode
from .frontiers import FrontierStore
from .gp import GpHyperparams, GpWindow
from .mission import MissionResult, compare_modes, run_mission
from .occupancy import OccupancyOctree, OccupancyParams, OccupancyState, VoxelKey
from .planner import Path, PlanRequest, plan
from .sensor import SensorModel, SensorPose
from .sim import WorldModel, generate_world, simulate_scan
from .updater import ScanInput, UpdateReport, process_scan
from .viewpoints import GainMode, GainParams, MeanShiftParams, mean_shift, select_best

__version__ = "0.1.0"
