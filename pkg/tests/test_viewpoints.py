import math

import numpy as np
import pytest

from asymp_explore.frontiers import FrontierStore
from asymp_explore.gp import GpWindow
from asymp_explore.occupancy import OccupancyOctree
from asymp_explore.viewpoints import (
    GainMode,
    GainParams,
    GainSource,
    MeanShiftParams,
    candidate_gains,
    cluster_candidates,
    deterministic_gain,
    exploration_gain,
    mean_shift,
    mean_shift_modes,
    project_to_free,
    rank_candidates,
    select_best,
)


def blob(rng, center, n=30, spread=0.2):
    return np.asarray(center, dtype=np.float64) + rng.normal(scale=spread, size=(n, 3))


class TestMeanShift:
    def test_single_point(self):
        np.testing.assert_allclose(mean_shift([[1.0, 2.0, 3.0]]), [[1.0, 2.0, 3.0]])

    def test_empty(self):
        assert mean_shift(np.zeros((0, 3))).shape == (0, 3)

    def test_two_separated_groups(self):
        rng = np.random.default_rng(0)
        pts = np.vstack([blob(rng, (0, 0, 0), spread=0.05), blob(rng, (10, 10, 10), spread=0.05)])
        c = mean_shift(pts)
        assert c.shape == (2, 3)
        c = c[np.argsort(c[:, 0])]
        np.testing.assert_allclose(c, [[0, 0, 0], [10, 10, 10]], atol=0.1)

    def test_coincident_points(self):
        c = mean_shift(np.tile([4.0, -1.0, 2.0], (25, 1)))
        np.testing.assert_allclose(c, [[4.0, -1.0, 2.0]])

    def test_centers_in_hull_bounds(self):
        rng = np.random.default_rng(3)
        pts = rng.uniform(-6, 6, size=(200, 3))
        c = mean_shift(pts)
        assert np.all(c >= pts.min(axis=0) - 1e-9) and np.all(c <= pts.max(axis=0) + 1e-9)

    def test_shifts_decrease(self):
        rng = np.random.default_rng(5)
        pts = np.vstack([blob(rng, (0, 0, 0), spread=1.0), blob(rng, (9, 0, 0), spread=1.0)])
        _, hist = mean_shift_modes(pts, MeanShiftParams(), return_history=True)
        for col in hist.T:
            col = col[~np.isnan(col)]
            assert np.all(np.diff(col) <= 1e-9)

    def test_labels_partition(self):
        rng = np.random.default_rng(1)
        pts = np.vstack([blob(rng, (0, 0, 0)), blob(rng, (0, 12, 0))])
        c, labels = mean_shift(pts, return_labels=True)
        assert labels.min() == 0 and labels.max() == len(c) - 1

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            MeanShiftParams(bandwidth=0.0)


class TestGain:
    def make(self):
        return OccupancyOctree((0, 0, 0), (10, 10, 10), 1.0)

    def test_fresh_cube_is_all_unknown(self):
        occ = self.make()
        assert deterministic_gain(occ, (5.5, 5.5, 5.5), GainParams(cube_half_edge=2.5)) == 125
        assert occ.count_states_in_box((5.5, 5.5, 5.5), 2.5) == (0, 0, 125)

    def test_explored_cube_is_zero(self):
        occ = self.make()
        occ.known[:] = True
        occ.log_odds[:] = -1.0
        assert deterministic_gain(occ, (5.5, 5.5, 5.5), GainParams(cube_half_edge=2.5)) == 0

    def test_as_printed(self):
        g = exploration_gain(10.0, (0, 0, 0), (2, 0, 0), GainParams(gain_mode=GainMode.AS_PRINTED))
        assert g == pytest.approx(10 * math.e, abs=1e-3)
        assert g == pytest.approx(27.183, abs=1e-3)

    def test_attenuating(self):
        g = exploration_gain(10.0, (0, 0, 0), (2, 0, 0), GainParams())
        assert g == pytest.approx(10 / math.e)

    def test_negative_info(self):
        with pytest.raises(ValueError):
            exploration_gain(-1.0, (0, 0, 0), (1, 0, 0), GainParams())

    @pytest.mark.parametrize("mode", list(GainMode))
    def test_ranking_scale_invariant(self, mode):
        rng = np.random.default_rng(7)
        p = GainParams(gain_mode=mode)
        info = rng.uniform(1, 100, 8)
        pos = rng.uniform(-5, 5, (8, 3))
        a = [exploration_gain(i, (0, 0, 0), x, p) for i, x in zip(info, pos)]
        b = [exploration_gain(3.7 * i, (0, 0, 0), x, p) for i, x in zip(info, pos)]
        assert np.argsort(a).tolist() == np.argsort(b).tolist()

    def test_attenuating_prefers_nearer(self):
        p = GainParams()
        assert exploration_gain(10, (0, 0, 0), (1, 0, 0), p) > exploration_gain(10, (0, 0, 0), (4, 0, 0), p)

    def test_as_printed_prefers_farther(self):
        p = GainParams(gain_mode=GainMode.AS_PRINTED)
        assert exploration_gain(10, (0, 0, 0), (4, 0, 0), p) > exploration_gain(10, (0, 0, 0), (1, 0, 0), p)


class TestCandidates:
    def make(self):
        return OccupancyOctree((0, 0, 0), (20, 20, 4), 0.4)

    def test_no_frontiers(self):
        occ = self.make()
        assert select_best(occ, FrontierStore(), (1, 1, 1)) is None

    def test_two_clusters_become_two_candidates(self):
        occ, fs = self.make(), FrontierStore()
        fs.seed(occ, [(5, 5, 4), (5, 6, 4), (6, 5, 4), (40, 40, 4), (41, 40, 4)])
        cands = cluster_candidates(occ, fs, MeanShiftParams(), GainParams())
        assert sorted(c.cluster_size for c in cands) == [2, 3]
        for c in cands:
            assert len(c.features) == 3 and sum(c.features) > 0

    def test_occupied_center_projected(self):
        occ, fs = self.make(), FrontierStore()
        fs.seed(occ, [(10, 10, 4)])
        occ.update_node((10, 10, 4), True)
        occ.update_node((11, 10, 4), False)
        cands = cluster_candidates(occ, fs, MeanShiftParams(), GainParams())
        np.testing.assert_allclose(cands[0].position, occ.center_of((11, 10, 4)))

    def test_occupied_center_without_free_dropped(self):
        occ, fs = self.make(), FrontierStore()
        fs.seed(occ, [(10, 10, 4)])
        occ.update_node((10, 10, 4), True)
        assert cluster_candidates(occ, fs, MeanShiftParams(), GainParams()) == []

    def test_project_to_free_radius(self):
        occ = self.make()
        occ.update_node((20, 20, 4), False)
        assert project_to_free(occ, occ.center_of((20, 20, 4)) + [3.0, 0, 0]) is None
        np.testing.assert_allclose(project_to_free(occ, occ.center_of((20, 20, 4)) + [1.5, 0, 0]),
                                   occ.center_of((20, 20, 4)))

    def test_nearer_of_equal_wins(self):
        occ, fs = self.make(), FrontierStore()
        fs.seed(occ, [(10, 25, 4), (30, 25, 4)])
        best = select_best(occ, fs, occ.center_of((12, 25, 4)))
        np.testing.assert_allclose(best.position, occ.center_of((10, 25, 4)), atol=0.01)

    def test_rank_tie_break_by_distance(self):
        occ, fs = self.make(), FrontierStore()
        fs.seed(occ, [(10, 25, 4), (30, 25, 4)])
        cands = cluster_candidates(occ, fs, MeanShiftParams(), GainParams(lambda_g=0.0))
        ranked = rank_candidates(cands, occ.center_of((28, 25, 4)), GainParams(lambda_g=0.0), [5.0, 5.0])
        np.testing.assert_allclose(ranked[0].position, occ.center_of((30, 25, 4)), atol=0.01)

    def test_gp_source(self):
        occ, fs = self.make(), FrontierStore()
        fs.seed(occ, [(10, 25, 4), (30, 25, 4)])
        cands = cluster_candidates(occ, fs, MeanShiftParams(), GainParams())
        gp = GpWindow().observe((1, 2, 3), 7.0)
        np.testing.assert_allclose(candidate_gains(occ, cands, GainSource.GP, GainParams(), gp), 7.0)
        with pytest.raises(ValueError):
            candidate_gains(occ, cands, GainSource.GP, GainParams())
