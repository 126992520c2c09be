"""
Tests for the exact simulator and its random streams.
"""
import math

import numpy as np
import pytest
from scipy import optimize, stats

from ifpt2d.exceptions import BoundaryBelowStart
from ifpt2d.models import ModelParams, PiecewiseLinearBoundary
from ifpt2d.process.ou2d import mean_at, transition
from ifpt2d.simulation.rng import PATHS_PER_BLOCK, block_count, block_generator, block_of
from ifpt2d.simulation.simulator import (
    PathEnsemble,
    batch_fpt,
    collect_crossing_records,
    first_passage_steps,
    grid_size,
    sample_fpt,
    simulate_path,
)
from ifpt2d.utils.goodness import two_sample_ks


@pytest.fixture
def params():
    return ModelParams(alpha=0.33, beta=0.2, mu=0.0, sigma=1.0)


@pytest.fixture
def boundary():
    return PiecewiseLinearBoundary(knot_times=[0.0, 5.0, 20.0], knot_values=[0.3, 0.8, 0.5])


class TestRandomStreams:
    def test_block_generator_is_reproducible(self):
        first = block_generator(7, 0, 3).standard_normal(5)
        second = block_generator(7, 0, 3).standard_normal(5)
        np.testing.assert_array_equal(first, second)

    def test_streams_and_blocks_differ(self):
        base = block_generator(7, 0, 0).standard_normal(4)
        assert not np.array_equal(base, block_generator(7, 1, 0).standard_normal(4))
        assert not np.array_equal(base, block_generator(7, 0, 1).standard_normal(4))
        assert not np.array_equal(base, block_generator(8, 0, 0).standard_normal(4))

    def test_block_bookkeeping(self):
        assert block_count(1) == 1
        assert block_count(PATHS_PER_BLOCK) == 1
        assert block_count(PATHS_PER_BLOCK + 1) == 2
        assert block_of(PATHS_PER_BLOCK - 1) == 0
        assert block_of(PATHS_PER_BLOCK) == 1


class TestPathEnsemble:
    def test_first_step_uses_exact_kernel(self, params):
        h = 0.1
        ensemble = PathEnsemble(params, h, 3, seed=11)
        xi = block_generator(11, 0, 0).standard_normal((PATHS_PER_BLOCK, 2))[:3]
        ensemble.advance(math.inf)
        _, c, _ = transition(h, params)
        factor = ensemble.factor
        np.testing.assert_allclose(ensemble.x1, c[0] + factor[0, 0] * xi[:, 0], rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(ensemble.x2, c[1] + factor[1, 0] * xi[:, 0] + factor[1, 1] * xi[:, 1], rtol=1e-12, atol=1e-14)

    def test_only_first_crossing_is_recorded(self, params):
        ensemble = PathEnsemble(params, 0.5, 50, seed=3)
        ensemble.advance(-10.0)
        first_steps = ensemble.cross_step.copy()
        ensemble.advance(-10.0)
        np.testing.assert_array_equal(ensemble.cross_step, first_steps)
        assert np.all(first_steps == 1)
        assert ensemble.n_alive == 0

    def test_crossed_records(self, params):
        ensemble = PathEnsemble(params, 0.5, 20, seed=3)
        crossed = ensemble.advance(-10.0)
        steps, z = ensemble.crossed_records()
        assert crossed.size == 20
        np.testing.assert_array_equal(steps, np.ones(20))
        np.testing.assert_array_equal(z, ensemble.x2)

    def test_rejects_bad_arguments(self, params):
        with pytest.raises(ValueError):
            PathEnsemble(params, 0.0, 10, seed=1)
        with pytest.raises(ValueError):
            PathEnsemble(params, 0.1, 0, seed=1)


class TestBatchSimulation:
    def test_grid_size(self):
        assert grid_size(20.0, 0.1) == 200
        assert grid_size(1.0, 0.3) == 3

    def test_deterministic_for_fixed_seed(self, params, boundary):
        first = batch_fpt(params, boundary, 20.0, 0.1, 500, seed=5)
        second = batch_fpt(params, boundary, 20.0, 0.1, 500, seed=5)
        np.testing.assert_array_equal(first.times, second.times)
        assert first.censored_count == second.censored_count

    def test_independent_of_worker_count(self, params, boundary):
        n_paths = 2 * PATHS_PER_BLOCK + 300
        single = batch_fpt(params, boundary, 10.0, 0.1, n_paths, seed=9, workers=1)
        threaded = batch_fpt(params, boundary, 10.0, 0.1, n_paths, seed=9, workers=3)
        np.testing.assert_array_equal(single.times, threaded.times)
        assert single.censored_count == threaded.censored_count

    def test_prefix_of_a_larger_batch(self, params, boundary):
        levels = boundary(0.1 * np.arange(1, 101))
        small, _ = first_passage_steps(params, 0.1, levels, 40, seed=4)
        large, _ = first_passage_steps(params, 0.1, levels, PATHS_PER_BLOCK + 60, seed=4, workers=2)
        np.testing.assert_array_equal(small, large[:40])

    def test_single_path_matches_batch(self, params, boundary):
        levels = boundary(0.1 * np.arange(1, 201))
        steps, _ = first_passage_steps(params, 0.1, levels, PATHS_PER_BLOCK + 10, seed=2)
        for index in (0, 17, PATHS_PER_BLOCK + 3):
            single = sample_fpt(params, boundary, 20.0, 0.1, seed=2, path_index=index)
            expected = steps[index] * 0.1 if steps[index] > 0 else None
            assert single == expected

    def test_simulated_path_matches_ensemble(self, params):
        path = simulate_path(params, 0.2, 15, seed=6, path_index=PATHS_PER_BLOCK + 2)
        ensemble = PathEnsemble(params, 0.2, PATHS_PER_BLOCK + 3, seed=6)
        for _ in range(15):
            ensemble.advance(math.inf)
        assert path.shape == (16, 2)
        np.testing.assert_array_equal(path[0], [0.0, 0.0])
        assert path[-1, 0] == ensemble.x1[PATHS_PER_BLOCK + 2]
        assert path[-1, 1] == ensemble.x2[PATHS_PER_BLOCK + 2]

    def test_unreachable_boundary_censors_everything(self, params):
        sample = batch_fpt(params, PiecewiseLinearBoundary.constant(50.0), 5.0, 0.1, 200, seed=1)
        assert sample.times.size == 0
        assert sample.censored_count == 200
        assert sample.censored_fraction == 1.0

    def test_boundary_below_start_is_rejected(self, params):
        with pytest.raises(BoundaryBelowStart):
            batch_fpt(params, PiecewiseLinearBoundary.constant(-0.1), 5.0, 0.1, 10, seed=1)

    def test_crossing_times_live_on_the_grid(self, params, boundary):
        sample = batch_fpt(params, boundary, 20.0, 0.25, 300, seed=8)
        steps = sample.times / 0.25
        np.testing.assert_allclose(steps, np.round(steps), atol=1e-9)
        assert sample.n_paths == 300
        assert np.all(sample.times <= 20.0)

    def test_crossing_records_carry_second_component(self, params, boundary):
        records = collect_crossing_records(params, boundary, 10.0, 0.1, 300, seed=12)
        levels = boundary(0.1 * np.arange(1, 101))
        steps, zs = first_passage_steps(params, 0.1, levels, 300, seed=12)
        assert len(records) == int(np.count_nonzero(steps > 0))
        first = records[0]
        index = int(np.flatnonzero(steps > 0)[0])
        assert first.step == steps[index]
        assert first.z == zs[index]
        assert first.t_cross == pytest.approx(first.step * 0.1)

    def test_noiseless_path_stays_at_rest(self):
        quiet = ModelParams(alpha=0.33, beta=0.2, mu=0.0, sigma=1e-12)
        path = simulate_path(quiet, 0.1, 100, seed=1)
        assert np.max(np.abs(path)) <= 1e-6

    def test_uncoupled_first_component_stays_at_zero(self, params):
        path = simulate_path(params.shifted(beta=0.0), 0.1, 50, seed=1)
        np.testing.assert_array_equal(path[:, 0], np.zeros(51))

    def test_noiseless_crossing_at_the_mean_root(self):
        driven = ModelParams(alpha=0.02, beta=0.02, mu=10.0, sigma=1e-12)
        h = 0.005
        root = optimize.brentq(lambda t: mean_at(t, driven)[0] - 1.0, 1e-6, 10.0, xtol=1e-12)
        crossing = sample_fpt(driven, PiecewiseLinearBoundary.constant(1.0), 10.0, h, seed=0)
        assert crossing is not None
        assert abs(crossing - root) <= h

    def test_crossing_probability_of_fixed_level(self, params):
        # one-step check: P(X1(h) > s) from the exact Gaussian law
        h, level, n_paths = 2.0, 0.2, 20_000
        steps, _ = first_passage_steps(params, h, np.array([level]), n_paths, seed=21)
        _, c, q = transition(h, params)
        expected = stats.norm.sf(level, loc=c[0], scale=math.sqrt(q[0, 0]))
        observed = np.mean(steps == 1)
        assert abs(observed - expected) <= 4.0 * math.sqrt(expected * (1 - expected) / n_paths)


def _ecdf_distance(first, second, grid):
    """Largest gap between two sub-distribution ecdfs over the given times."""
    return float(np.max(np.abs(first.ecdf(grid) - second.ecdf(grid))))


class TestLawOfBatches:
    def test_disjoint_seeds_draw_the_same_law(self, params, boundary):
        first = batch_fpt(params, boundary, 10.0, 0.1, 20_000, seed=1)
        second = batch_fpt(params, boundary, 10.0, 0.1, 20_000, seed=2)
        assert not np.array_equal(first.times, second.times)
        distance, pvalue = two_sample_ks(first, second)
        assert distance <= 0.03
        assert pvalue > 1e-4

    def test_halving_the_step_stays_within_the_noise_floor(self, params, boundary):
        h, horizon, n_paths = 0.2, 10.0, 20_000
        # between fine grid points, clear of rounding in the crossing times
        coarse_grid = h * np.arange(1, grid_size(horizon, h) + 1) + 0.25 * h
        runs = [batch_fpt(params, boundary, horizon, h, n_paths, seed=s) for s in range(1, 9)]
        floor = np.mean([_ecdf_distance(runs[k], runs[k + 1], coarse_grid) for k in range(0, 8, 2)])
        fine = batch_fpt(params, boundary, horizon, h / 2, n_paths, seed=20)
        assert _ecdf_distance(runs[0], fine, coarse_grid) <= 2.0 * floor
