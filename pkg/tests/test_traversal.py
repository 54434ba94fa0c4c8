import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings, strategies as st

from asymp_explore.traversal import segment_keys
from oracles import crossing_gap, sampled_keys

RES = 0.4
ORIGIN = np.zeros(3)

coord = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False)
point = st.tuples(coord, coord, coord)


def walk(a, b, res=RES, origin=ORIGIN):
    keys, counts, t_enter = segment_keys(np.array([a]), np.array([b]), origin, res)
    return [tuple(int(v) for v in k) for k in keys[0, :counts[0]]], t_enter[0, :counts[0]]


class TestSegmentKeys:
    def test_axis_aligned(self):
        keys, _ = walk((0.2, 0.2, 0.2), (1.8, 0.2, 0.2))
        assert keys == [(i, 0, 0) for i in range(5)]

    def test_negative_direction(self):
        keys, _ = walk((1.8, 0.2, 0.2), (0.2, 0.2, 0.2))
        assert keys == [(i, 0, 0) for i in range(4, -1, -1)]

    def test_exact_diagonal_steps_through_edges(self):
        keys, _ = walk((0.2, 0.2, 0.2), (1.8, 1.8, 0.2))
        assert keys == [(i, i, 0) for i in range(5)]

    def test_exact_space_diagonal(self):
        keys, _ = walk((0.2, 0.2, 0.2), (1.4, 1.4, 1.4))
        assert keys == [(i, i, i) for i in range(4)]

    def test_single_voxel(self):
        keys, t = walk((0.1, 0.1, 0.1), (0.3, 0.2, 0.1))
        assert keys == [(0, 0, 0)]
        assert t[0] == 0.0

    def test_enter_parameters_increase(self):
        _, t = walk((0.13, 0.27, 0.05), (3.3, 1.1, 2.9))
        assert t[0] == 0.0
        assert np.all(np.diff(t) > 0)
        assert t[-1] <= 1.0

    def test_batch_padding(self):
        keys, counts, t = segment_keys(np.array([[0.1, 0.1, 0.1], [0.1, 0.1, 0.1]]),
                                       np.array([[0.3, 0.1, 0.1], [2.1, 0.1, 0.1]]), ORIGIN, RES)
        assert counts.tolist() == [1, 6]
        assert np.all(keys[0] == keys[0, 0])
        assert np.all(np.isinf(t[0, 1:]))

    def test_walk_is_independent_of_segment_length(self):
        # a ray grazing voxel edges must visit the same voxels however far it is cast
        o = np.array([3.5857864376269073, 6.414213562373093, 1.0])
        d = np.array([-0.68871132, 0.68871132, 0.22661298])
        d /= np.linalg.norm(d)
        long_keys, _ = walk(o, o + 5.0 * d)
        for length in (1.3, 2.7, 3.9, 4.41):
            short, _ = walk(o, o + length * d)
            assert short == long_keys[:len(short)]

    @given(point, point)
    @settings(max_examples=300, deadline=None)
    def test_contiguous_and_endpoints(self, a, b):
        a, b = np.array(a), np.array(b)
        assume(np.linalg.norm(b - a) > 1e-6)
        keys, _ = walk(a, b)
        assert keys[0] == tuple(np.floor(a / RES).astype(int))
        assert keys[-1] == tuple(np.floor(b / RES).astype(int))
        steps = np.diff(np.array(keys), axis=0)
        assert np.all(np.abs(steps) <= 1)
        assert np.all(np.abs(steps).sum(axis=1) >= 1)
        assert len(set(keys)) == len(keys)

    @given(st.integers(min_value=0, max_value=2 ** 32 - 1))
    @settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.filter_too_much])
    def test_matches_sampler_when_not_degenerate(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.uniform(-5.0, 5.0, size=(2, 3))
        assume(np.linalg.norm(b - a) > 0.05)
        assume(crossing_gap(a, b, ORIGIN, RES) >= 3 * RES / 100)
        keys, _ = walk(a, b)
        assert keys == sampled_keys(a, b, ORIGIN, RES, RES / 100)


class TestOracleHelpers:
    def test_gap_detects_corner_graze(self):
        assert crossing_gap((0.2, 0.2, 0.2), (1.8, 1.8, 0.2), ORIGIN, RES) == pytest.approx(0.0, abs=1e-12)

    def test_gap_of_plain_segment(self):
        gap = crossing_gap((0.2, 0.2, 0.2), (1.8, 0.2, 0.2), ORIGIN, RES)
        assert gap == pytest.approx(0.2)
