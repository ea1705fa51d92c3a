"""Unit tests for the analysis metrics."""

from itertools import combinations

import numpy as np
import pytest

from src.bodyplan import SHAPE, BodyPlan, Component
from src.errors import AnalysisError, InterfaceError
from src.metrics import (
    PoolSnapshot,
    behavioural_variance,
    fitness_by_index_table,
    morph_scalar,
    morph_variance_table,
    morphological_variance,
    rank_sum_test,
    resample_trajectory,
    top_diversity_table,
    top_k,
    trajectory_bundle,
    trajectory_distance,
)
from src.models import ComponentType
from tests.builders import make_plan


def constant_path(x, y, points=180):
    return np.column_stack([np.full(points, float(x)), np.full(points, float(y))])


class TestMorphScalar:
    """Test the scalar morphology summary."""

    def test_single_voxel(self):
        assert morph_scalar(make_plan([])) == pytest.approx(3 / 11)

    def test_full_chassis_with_eight_wheels(self):
        components = tuple(Component((0, 0, z), ComponentType.WHEEL) for z in range(8))
        plan = BodyPlan(np.ones(SHAPE, dtype=bool), components)
        assert morph_scalar(plan) == pytest.approx(4.0)

    def test_counts_are_capped(self):
        components = tuple(Component((0, y, z), ComponentType.SENSOR) for y in range(3) for z in range(4))
        plan = BodyPlan(np.ones(SHAPE, dtype=bool), components)
        assert morph_scalar(plan) == pytest.approx(4.0)

    def test_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            voxels = rng.random(SHAPE) < 0.3
            components = tuple(
                Component(tuple(int(v) for v in rng.integers(0, 11, 3)), ComponentType(int(rng.integers(1, 5))))
                for _ in range(int(rng.integers(0, 12)))
            )
            value = morph_scalar(BodyPlan(voxels, components))
            assert 0.0 <= value <= 7.0


class TestMorphologicalVariance:
    """Test pool variance."""

    def snapshot(self, values):
        return PoolSnapshot(0, tuple(range(len(values))), tuple(0.0 for _ in values), tuple(values))

    def test_identical_members(self):
        assert morphological_variance(self.snapshot([2.0, 2.0, 2.0])) == 0.0

    def test_population_variance(self):
        assert morphological_variance(self.snapshot([1.0, 3.0])) == pytest.approx(1.0)

    def test_matches_textbook_formula(self):
        values = list(np.random.default_rng(1).uniform(0, 7, 25))
        mean = sum(values) / len(values)
        expected = sum((v - mean) ** 2 for v in values) / len(values)
        assert morphological_variance(self.snapshot(values)) == pytest.approx(expected)


class TestTrajectories:
    """Test resampling and trajectory distances."""

    def test_stationary(self):
        traj = np.array([[0.0, 1.0, 1.5], [10.0, 1.0, 1.5]])
        resampled = resample_trajectory(traj)
        assert resampled.shape == (180, 2)
        np.testing.assert_allclose(resampled, constant_path(1.0, 1.5))

    def test_straight_line_is_evenly_spaced(self):
        traj = np.array([[0.0, 0.0, 0.0], [60.0, 1.79, 0.0]])
        resampled = resample_trajectory(traj)
        np.testing.assert_allclose(np.diff(resampled[:, 0]), np.full(179, 0.01))

    def test_aborted_run_holds_last_position(self):
        traj = np.array([[0.0, 0.0, 0.0], [10.0, 0.5, 0.0]])
        resampled = resample_trajectory(traj)
        assert resampled[-1, 0] == 0.5
        assert resampled[30, 0] == 0.5

    def test_empty_trajectory(self):
        with pytest.raises(InterfaceError):
            resample_trajectory(np.zeros((0, 3)))

    def test_distance_identity_and_offset(self):
        a = constant_path(0.0, 0.0)
        assert trajectory_distance(a, a) == 0.0
        assert trajectory_distance(a, constant_path(0.5, 0.0)) == pytest.approx(0.5)

    def test_distance_is_symmetric(self):
        rng = np.random.default_rng(2)
        a, b = rng.random((180, 2)), rng.random((180, 2))
        assert trajectory_distance(a, b) == trajectory_distance(b, a)

    def test_distance_length_mismatch(self):
        with pytest.raises(InterfaceError):
            trajectory_distance(np.zeros((180, 2)), np.zeros((179, 2)))


class TestBehaviouralVariance:
    """Test mean pairwise trajectory distance."""

    def test_identical(self):
        assert behavioural_variance([constant_path(1, 1)] * 3) == 0.0

    def test_three_trajectories(self):
        trajs = [constant_path(0, 0), constant_path(1, 0), constant_path(3, 0)]
        assert behavioural_variance(trajs) == pytest.approx(2.0)

    def test_matches_all_pairs_oracle(self):
        rng = np.random.default_rng(3)
        trajs = [rng.random((180, 2)) for _ in range(20)]
        pairs = [np.mean(np.linalg.norm(a - b, axis=1)) for a, b in combinations(trajs, 2)]
        assert behavioural_variance(trajs) == pytest.approx(np.mean(pairs))

    def test_order_invariant(self):
        rng = np.random.default_rng(4)
        trajs = [rng.random((180, 2)) for _ in range(6)]
        assert behavioural_variance(trajs) == pytest.approx(behavioural_variance(trajs[::-1]))

    def test_needs_two(self):
        with pytest.raises(AnalysisError):
            behavioural_variance([constant_path(0, 0)])


class TestTopK:
    """Test best-robot selection."""

    def test_global_best(self):
        assert top_k([(0, 0.2), (1, 0.7), (2, 0.4)], 1) == [(1, 0.7)]

    def test_ties_and_order(self):
        assert top_k([(0, 0.5), (1, 0.5), (2, 0.3)], 2) == [(0, 0.5), (1, 0.5)]
        assert top_k([(4, 0.1), (2, 0.5), (3, 0.5)], 3) == [(2, 0.5), (3, 0.5), (4, 0.1)]

    def test_too_few_robots(self):
        with pytest.raises(AnalysisError):
            top_k([(0, 0.5)], 20)


class TestTables:
    """Test table builders and the rank test."""

    def test_pool_tables(self):
        snapshots = [
            PoolSnapshot(4, (0, 1), (0.25, 0.75), (1.0, 3.0)),
            PoolSnapshot(5, (1, 2), (0.75, 0.75), (3.0, 3.0)),
        ]
        fitness = fitness_by_index_table(snapshots)
        assert list(fitness["clock"]) == [4, 5]
        assert list(fitness["mean_fitness"]) == [0.5, 0.75]
        assert list(morph_variance_table(snapshots)["morph_variance"]) == [1.0, 0.0]

    def test_top_diversity_row(self):
        """Mean fitness, population variance of the scalars and mean pairwise distance."""
        top = [(3, 0.5), (1, 0.25), (7, 0.25)]
        trajs = [constant_path(0, 0), constant_path(1, 0), constant_path(3, 0)]
        table = top_diversity_table(top, [1.0, 2.0, 3.0], trajs)
        assert list(table.columns) == [
            "top_k",
            "requested_k",
            "top20_mean_fitness",
            "top20_morph_variance",
            "behavioural_variance",
        ]
        row = table.iloc[0]
        assert (row["top_k"], row["requested_k"]) == (3, 20)
        assert row["top20_mean_fitness"] == pytest.approx(1 / 3)
        assert row["top20_morph_variance"] == pytest.approx(2 / 3)
        assert row["behavioural_variance"] == pytest.approx(2.0)

    def test_top_diversity_single_robot(self):
        """One robot has no pairwise spread."""
        table = top_diversity_table([(0, 0.5)], [1.0], [constant_path(0, 0)], requested_k=20)
        assert table["top20_morph_variance"].iloc[0] == 0.0
        assert np.isnan(table["behavioural_variance"].iloc[0])

    def test_top_diversity_length_mismatch(self):
        with pytest.raises(InterfaceError):
            top_diversity_table([(0, 0.5), (1, 0.4)], [1.0], [constant_path(0, 0)] * 2)

    def test_trajectory_bundle(self):
        bundle = trajectory_bundle([3, 8], [constant_path(0, 1), constant_path(2, 3)])
        assert len(bundle) == 360
        assert list(bundle.columns) == ["robot_index", "point", "x", "y"]

    def test_rank_sum_detects_a_shift(self):
        _, pvalue = rank_sum_test([0.1, 0.15, 0.12, 0.11, 0.13], [0.5, 0.55, 0.52, 0.51, 0.53])
        assert pvalue < 0.05

    def test_mann_whitney(self):
        statistic, pvalue = rank_sum_test([1, 2, 3], [1, 2, 3], test="mannwhitney")
        assert pvalue == pytest.approx(1.0)

    def test_unknown_test(self):
        with pytest.raises(AnalysisError):
            rank_sum_test([1.0], [2.0], test="t")
