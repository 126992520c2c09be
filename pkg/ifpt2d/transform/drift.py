"""
Moving the time dependence of a boundary into the input of the process.

With Y1(t) = X1(t) - S(t) + Sigma and Y2(t) = X2(t), the crossing of X1 over S(t) is the
crossing of Y1 over the constant Sigma, and Y solves the same linear system
with the time-dependent input

    mu1(t) = -(alpha + beta) (S(t) - Sigma) - S'(t)
    mu2(t) = mu + beta (S(t) - Sigma)

started from Y(0) = (0 - S(0) + Sigma, 0).
"""
import logging

import numpy as np

from ifpt2d.exceptions import TooFewKnots
from ifpt2d.models import BoundaryEstimate, DriftSchedule, FptSampleSet, ModelParams
from ifpt2d.process.ou2d import input_gain
from ifpt2d.simulation.simulator import first_passage_steps, grid_size

logger = logging.getLogger("IFPT2D.Transform")


def boundary_slope(b: BoundaryEstimate) -> np.ndarray:
    """
    S'(t) at the knots: central differences inside, second-order one-sided
    differences at both ends.
    """
    if b.grid.size < 3:
        raise TooFewKnots(f"need at least 3 knots to differentiate a boundary, got {b.grid.size}")
    # differencing S - S(0) keeps a constant boundary's slope exactly zero
    return np.gradient(b.values - b.values[0], b.grid, edge_order=2)


def to_drift(b: BoundaryEstimate, sigma_level: float, p: ModelParams) -> DriftSchedule:
    """
    Input schedule M(t) = (mu1, mu2) and start point that turn the boundary b into
    the constant threshold sigma_level.

    Raises:
        TooFewKnots: if b has fewer than 3 knots.
    """
    slope = boundary_slope(b)
    offset = b.values - sigma_level
    mu1 = -(p.alpha + p.beta) * offset - slope
    mu2 = p.mu + p.beta * offset
    start = 0.0 - float(b.values[0]) + sigma_level
    logger.info(
        f"Drift schedule for threshold {sigma_level:g}: mu1 in [{mu1.min():.4g}, {mu1.max():.4g}], "
        f"mu2 in [{mu2.min():.4g}, {mu2.max():.4g}], start {start:.6g}"
    )
    return DriftSchedule(grid=b.grid, mu1=mu1, mu2=mu2, sigma_level=sigma_level, y0=(start, 0.0))


def step_increments(ds: DriftSchedule, p: ModelParams, h: float, n_steps: int) -> np.ndarray:
    """
    Deterministic increment of each simulation step, Gamma(h) M(t_k + h/2),
    with the input held at its midpoint value over the step.
    """
    mu1, mu2 = ds.input_at(h * np.arange(n_steps) + 0.5 * h)
    gain = input_gain(h, p)
    return gain[:, 0] * mu1[:, None] + gain[:, 1] * mu2[:, None]


def simulate_transformed(
    ds: DriftSchedule,
    p: ModelParams,
    h: float,
    horizon: float,
    n_paths: int,
    seed: int,
    stream: int = 0,
    workers: int = 1,
) -> FptSampleSet:
    """
    First passage of Y1 over the constant ds.sigma_level for the system driven by
    ds, with the noise of the original system for the same (seed, stream).

    The schedule is held constant past its last knot.
    """
    if ds.grid[-1] < horizon * (1.0 - 1e-12):
        logger.warning(f"Drift schedule ends at {ds.grid[-1]:g}, before the horizon {horizon:g}; holding its last value")
    n_steps = grid_size(horizon, h)
    increments = step_increments(ds, p, h, n_steps)
    levels = np.full(n_steps, ds.sigma_level)
    steps, _ = first_passage_steps(
        p, h, levels, n_paths, seed, stream=stream, workers=workers, x0=ds.y0, increments=increments
    )
    crossed = steps > 0
    sample = FptSampleSet(
        times=steps[crossed] * h,
        censored_count=int(np.count_nonzero(~crossed)),
        horizon=horizon,
        seed=seed,
    )
    logger.info(
        f"Transformed simulation: {sample.times.size}/{n_paths} paths crossed {ds.sigma_level:g} "
        f"before t={horizon:g}"
    )
    return sample
