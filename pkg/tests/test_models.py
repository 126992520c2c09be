import numpy as np
import pytest
from datetime import datetime, timedelta
from pydantic import ValidationError

from ifpt2d.models import (
    BoundaryEstimate,
    DriftSchedule,
    FptSampleSet,
    GridInfo,
    ModelParams,
    Moments2,
    PiecewiseLinearBoundary,
    SolveSummary,
    State2,
)


class TestModelParams:
    def test_creation_without_range_checks(self):
        """Construction accepts any float; range checks live in validate_params."""
        p = ModelParams(alpha=-1.0, beta=0.0, mu=0.0, sigma=0.0)
        assert p.is_degenerate

    def test_is_frozen(self):
        p = ModelParams(alpha=0.33, beta=0.2, mu=0.0, sigma=1.0)
        with pytest.raises(ValidationError):
            p.alpha = 1.0

    def test_shifted_copy(self):
        p = ModelParams(alpha=0.33, beta=0.2, mu=0.0, sigma=1.0)
        q = p.shifted(mu=0.3)
        assert q.mu == 0.3 and p.mu == 0.0
        assert q.alpha == p.alpha


class TestState2AndMoments:
    def test_state_rejects_non_finite(self):
        with pytest.raises(ValidationError):
            State2(x1=float("inf"), x2=0.0)

    def test_state_as_array(self):
        np.testing.assert_array_equal(State2(x1=1.0, x2=2.0).as_array(), [1.0, 2.0])

    def test_moments_shapes(self):
        with pytest.raises(ValidationError):
            Moments2(mean=[0.0, 0.0, 0.0], cov=np.eye(2))
        with pytest.raises(ValidationError):
            Moments2(mean=[0.0, 0.0], cov=np.eye(3))

    def test_moments_reject_invalid_covariance(self):
        with pytest.raises(ValidationError, match="symmetric"):
            Moments2(mean=[0.0, 0.0], cov=[[1.0, 0.5], [0.4, 1.0]])
        with pytest.raises(ValidationError, match="determinant"):
            Moments2(mean=[0.0, 0.0], cov=[[1.0, 2.0], [2.0, 1.0]])

    def test_singular_covariance_is_accepted(self):
        m = Moments2(mean=[0.0, 0.0], cov=[[0.0, 0.0], [0.0, 1.0]])
        assert m.cov[1, 1] == 1.0


class TestPiecewiseLinearBoundary:
    def test_interpolates_and_holds_last_value(self):
        b = PiecewiseLinearBoundary(knot_times=[0.0, 1.0, 2.0], knot_values=[0.0, 1.0, 3.0])
        np.testing.assert_allclose(b(np.array([0.5, 1.5, 10.0])), [0.5, 2.0, 3.0])

    @pytest.mark.parametrize(
        "times, values",
        [
            ([], []),
            ([0.0, 1.0], [1.0]),
            ([0.5, 1.0], [1.0, 1.0]),
            ([0.0, 1.0, 1.0], [1.0, 1.0, 1.0]),
            ([0.0, 1.0], [1.0, float("nan")]),
        ],
    )
    def test_rejects_bad_knots(self, times, values):
        with pytest.raises(ValidationError):
            PiecewiseLinearBoundary(knot_times=times, knot_values=values)

    def test_constant_and_shifted(self):
        b = PiecewiseLinearBoundary.constant(0.7).shifted(0.3)
        assert b(12.0) == pytest.approx(1.0)


class TestFptSampleSet:
    def test_counts_and_ecdf(self):
        sample = FptSampleSet(times=[1.0, 2.0, 2.0], censored_count=1, horizon=5.0, seed=0)
        assert sample.n_paths == 4
        assert sample.censored_fraction == 0.25
        np.testing.assert_allclose(sample.ecdf([0.5, 2.0, 10.0]), [0.0, 0.75, 0.75])

    def test_rejects_times_past_the_horizon(self):
        with pytest.raises(ValidationError):
            FptSampleSet(times=[6.0], censored_count=0, horizon=5.0, seed=0)


class TestBoundaryEstimate:
    @pytest.fixture
    def estimate(self):
        grid = np.linspace(0.0, 4.0, 5)
        return BoundaryEstimate(
            grid=grid,
            values=[1.0, 1.0, 0.5, 0.5, 2.0],
            residuals=np.zeros(5),
            theta_counts=np.zeros(5),
            mean_x1=[0.0, 0.5, 1.0, 1.0, 1.0],
        )

    def test_grid_properties(self, estimate):
        assert estimate.horizon == 4.0
        assert estimate.step == 1.0
        assert estimate(0.5) == 1.0

    def test_mean_intersections(self, estimate):
        crossings = estimate.mean_intersections()
        assert len(crossings) == 2
        t, level = crossings[0]
        assert t == pytest.approx(1.5)
        assert level == pytest.approx(0.75)
        # gap goes -0.5 -> 1.0 between t=3 and t=4
        assert crossings[1][0] == pytest.approx(3.0 + 1.0 / 3.0)

    def test_misaligned_diagnostics(self):
        with pytest.raises(ValidationError, match="residuals"):
            BoundaryEstimate(grid=[0.0, 1.0], values=[1.0, 1.0], residuals=[0.0], theta_counts=[0, 0], mean_x1=[0, 0])


class TestDriftSchedule:
    def test_alignment(self):
        with pytest.raises(ValidationError):
            DriftSchedule(grid=[0.0, 1.0], mu1=[0.0], mu2=[0.0, 0.0], sigma_level=1.0, y0=(0.0, 0.0))


def test_summary_timestamps():
    summary = SolveSummary(
        params=ModelParams(alpha=0.33, beta=0.2, mu=0.0, sigma=1.0),
        target={"family": "gamma"},
        seed=0,
        grid=GridInfo(horizon=20.0, n_steps=200, step=0.1),
        solver={},
        consumed_mass=0.99,
        wall_seconds=0.1,
    )
    assert isinstance(summary.generated_at, datetime)
    assert summary.generated_at.utcoffset() == timedelta(0)
    assert summary.flags == [] and summary.recipe is None
