import math

import pytest

from asymp_explore.config import DEFAULTS, ConfigError, MissionConfig, Mode
from asymp_explore.viewpoints import GainMode


class TestMissionConfig:
    def test_defaults(self):
        cfg = MissionConfig()
        assert cfg.mode is Mode.ASYMP
        assert cfg["mission.success_threshold"] == 0.90
        assert cfg["mission.max_sim_time_s"] == 1000.0
        assert cfg.gain_params().gain_mode is GainMode.ATTENUATING
        hp = cfg.gp_hyperparams()
        assert (hp.sigma_f2, hp.length_scale, hp.sigma_n2, hp.window) == (1.0, 0.3, 0.01, 200)

    def test_double_underscore_keyword(self):
        cfg = MissionConfig(mission__mode="asymp_bayes", gp__window=50)
        assert cfg.mode is Mode.ASYMP_BAYES
        assert cfg.gp_hyperparams().window == 50

    def test_with_returns_copy(self):
        a = MissionConfig()
        b = a.with_(robot__v_max=2.0)
        assert a["robot.v_max"] == 1.0 and b["robot.v_max"] == 2.0

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown"):
            MissionConfig({"map.nope": 1})

    @pytest.mark.parametrize("key,value", [
        ("mission.success_threshold", 0.0),
        ("mission.success_threshold", 1.5),
        ("mission.max_sim_time_s", -1),
        ("mission.scan_every_ticks", 0),
        ("mission.mode", "greedy"),
        ("gain.mode", "inverse"),
        ("world.file", "/nonexistent/world.txt"),
        ("gp.window", "many"),
        ("plan.allow_unknown", "maybe"),
    ])
    def test_invalid_values(self, key, value):
        with pytest.raises(ConfigError):
            MissionConfig({key: value})

    def test_text_round_trip(self):
        cfg = MissionConfig(mission__mode="asymp_bayes", plan__allow_unknown=True, world__kind="room")
        back = MissionConfig.from_text(cfg.to_text())
        assert back.values == cfg.values

    def test_text_comments_and_errors(self, tmp_path):
        f = tmp_path / "c.cfg"
        f.write_text("# comment\nrobot.v_max = 0.5  # slower\n\nworld.kind = room\n")
        cfg = MissionConfig.from_file(f)
        assert cfg["robot.v_max"] == 0.5 and cfg["world.kind"] == "room"
        with pytest.raises(ConfigError, match="line 1"):
            MissionConfig.from_text("robot.v_max 0.5\n")

    def test_typed_groups(self):
        cfg = MissionConfig()
        assert cfg.sensor_model().n_rays == 73 * 7
        assert cfg.meanshift_params().bandwidth == 2.0
        assert cfg.occupancy_params().p_hit == 0.7
        assert math.isclose(cfg.sensor_model().max_range, 5.0)

    def test_every_default_coerces(self):
        MissionConfig({k: str(v) for k, v in DEFAULTS.items() if k != "world.file"})
