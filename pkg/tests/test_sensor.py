import math

import numpy as np
import pytest

from asymp_explore.occupancy import EmptyRayError
from asymp_explore.sensor import DEG, SensorModel, SensorPose, point_behind, points_behind


class TestSensorModel:
    def test_count_formula(self):
        m = SensorModel(max_range=20.0, az_span=2 * math.pi, el_span=0.59, az_step=0.0175, el_step=0.0175)
        n_az = math.floor(2 * math.pi / 0.0175) + 1
        n_el = math.floor(0.59 / 0.0175) + 1
        assert (n_az, n_el) == (360, 34)
        assert m.n_rays == n_az * n_el == 12240

    def test_default_one_degree(self):
        assert SensorModel().n_rays == 361 * 34

    def test_coarse(self):
        m = SensorModel.coarse()
        assert m.max_range == 5.0
        assert m.n_rays == 73 * 7

    def test_count_constant_across_poses(self):
        m = SensorModel.coarse()
        rng = np.random.default_rng(0)
        for _ in range(10):
            o, d = m.rays_from(SensorPose(rng.uniform(-5, 5, 3), rng.uniform(-4, 4)))
            assert o.shape == d.shape == (m.n_rays, 3)

    def test_unit_directions(self):
        _, d = SensorModel().rays_from(SensorPose((1.0, 2.0, 3.0), 0.7))
        np.testing.assert_allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-9)

    def test_yaw_zero_is_identity(self):
        m = SensorModel.coarse()
        _, d = m.rays_from(SensorPose((0, 0, 0), 0.0))
        np.testing.assert_array_equal(d, m.directions)
        # first azimuth is the +x reference direction, tilted by the lowest elevation
        np.testing.assert_allclose(d[0], [math.cos(-0.295), 0.0, math.sin(-0.295)], atol=1e-12)

    def test_yaw_pi_negates_horizontal(self):
        m = SensorModel.coarse()
        _, d0 = m.rays_from(SensorPose((0, 0, 0), 0.0))
        _, d1 = m.rays_from(SensorPose((0, 0, 0), math.pi))
        np.testing.assert_allclose(d1[:, :2], -d0[:, :2], atol=1e-12)
        np.testing.assert_array_equal(d1[:, 2], d0[:, 2])

    def test_elevations_symmetric(self):
        m = SensorModel(el_span=30 * DEG, el_step=5 * DEG)
        el = np.unique(np.round(np.arcsin(m.directions[:, 2]), 12))
        np.testing.assert_allclose(el, -el[::-1], atol=1e-12)

    @pytest.mark.parametrize("kw", [{"max_range": 0.0}, {"az_step": 0.0}, {"el_step": -1.0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SensorModel(**kw)


class TestSensorPose:
    def test_yaw_wrapped(self):
        assert SensorPose((0, 0, 0), math.pi).yaw == pytest.approx(-math.pi)
        assert SensorPose((0, 0, 0), 3 * math.pi / 2).yaw == pytest.approx(-math.pi / 2)
        assert -math.pi <= SensorPose((0, 0, 0), 100.0).yaw < math.pi

    def test_non_finite(self):
        with pytest.raises(ValueError):
            SensorPose((0, float("nan"), 0))


class TestPointBehind:
    def test_formula(self):
        np.testing.assert_allclose(point_behind((0, 0, 0), (4.0, 0, 0), 0.4), [4.4, 0, 0])

    def test_collinear(self):
        o = np.array([1.0, -2.0, 0.5])
        d = np.array([0.3, 0.4, -0.2])
        d /= np.linalg.norm(d)
        p = point_behind(o, o + 7.0 * d, 0.4)
        np.testing.assert_allclose(p, o + 7.4 * d, atol=1e-12)

    def test_zero_resolution(self):
        np.testing.assert_array_equal(point_behind((0, 0, 0), (1, 2, 3), 0.0), [1, 2, 3])

    def test_zero_length(self):
        with pytest.raises(EmptyRayError):
            point_behind((1, 1, 1), (1, 1, 1), 0.4)
        with pytest.raises(EmptyRayError):
            points_behind(np.zeros((2, 3)), np.array([[1.0, 0, 0], [0, 0, 0]]), 0.4)

    def test_batched_matches_scalar(self):
        rng = np.random.default_rng(2)
        o = rng.normal(size=(20, 3))
        e = rng.normal(size=(20, 3))
        batch = points_behind(o, e, 0.4)
        for i in range(20):
            np.testing.assert_allclose(batch[i], point_behind(o[i], e[i], 0.4), atol=1e-12)
