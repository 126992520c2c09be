"""
Sequential estimation of the boundary that produces a given first-passage-time law.

At grid time t_i the boundary value S_i solves

    erfc((S_i - m1(t_i)) / sqrt(2 Q11(t_i)))
        = sum_{j<i} w_j theta_ij(S_i) + 2 w_i

where w_j are quadrature weights of the target law and theta_ij is the mean of
erfc((S_i - E[X1(t_i) | X(t_j) = (S_j, Z)]) / sqrt(2 Var[X1(t_i) | X(t_j)]))
over the law of Z = X2 at first crossings near t_j. That law is sampled by
simulating paths against the knots S_1 .. S_{i-1} fixed so far.
"""
import logging
import math
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, special

from ifpt2d.config import SolverConfig
from ifpt2d.exceptions import (
    DegenerateVariance,
    InsufficientMass,
    InsufficientRecords,
    NoBracket,
    SolverError,
)
from ifpt2d.models import BoundaryEstimate, ModelParams
from ifpt2d.process.ou2d import covariance_entries, mean_at, transition_matrix, validate_params
from ifpt2d.simulation.simulator import PathEnsemble
from ifpt2d.targets.distributions import TargetDistribution, describe

logger = logging.getLogger("IFPT2D.Solver")

# Below this much target mass on [0, horizon] the window does not constrain a boundary.
MIN_TARGET_MASS = 0.05
# Bins are widened by at most this many grid steps on each side.
MAX_BIN_WIDENING = 3
ERFCINV_CLAMP = 1e-12
# Initial bracket half-width, in standard deviations of X1(t_i).
BRACKET_SDS = 8.0
BISECT_MAXITER = 500


def _scale(q11: float, variance_floor: float, lag: float) -> float:
    if not q11 >= variance_floor:
        raise DegenerateVariance(
            f"Var[X1] = {q11:.3g} after a lag of {lag:.6g} is below the floor {variance_floor:g}; "
            f"with beta = 0 the first component carries no noise"
        )
    return math.sqrt(2.0 * q11)


def _conditional_centers(phi11: float, phi12: float, m1_lag: float, s_j: float, z: np.ndarray) -> np.ndarray:
    """E[X1(t_j + lag) | X(t_j) = (s_j, z)] from the lag quantities Phi(lag) and m1(lag)."""
    return phi11 * s_j + phi12 * z + m1_lag


def _erfc_terms(s: float, centers: np.ndarray, scales) -> np.ndarray:
    return special.erfc((s - centers) / scales)


def lhs_survival(s, t: float, p: ModelParams, variance_floor: float = 1e-300):
    """
    erfc((s - m1(t)) / sqrt(2 Q11(t))), i.e. twice P(X1(t) > s).

    Args:
        s: Level (scalar or array).
        t: Time, t > 0.
        p: Process constants.
        variance_floor: Smallest admissible Q11(t).

    Raises:
        DegenerateVariance: if Q11(t) < variance_floor.
    """
    if t <= 0.0:
        raise ValueError(f"lhs_survival needs t > 0, got {t}")
    scale = _scale(float(covariance_entries(t, p)[0]), variance_floor, t)
    value = special.erfc((np.asarray(s, dtype=float) - float(mean_at(t, p)[0])) / scale)
    return float(value) if np.ndim(s) == 0 else value


def theta_hat(
    i: int,
    j: int,
    knots: Sequence[float],
    z: np.ndarray,
    p: ModelParams,
    s_i: float,
    h: float,
    min_records: int = 1,
    variance_floor: float = 1e-300,
) -> float:
    """
    Monte Carlo estimate of the kernel theta_ij at the level s_i.

    Args:
        i: Current step.
        j: Conditioning step, 1 <= j < i.
        knots: Boundary values indexed by step; knots[j] = S(t_j).
        z: X2 at the selected crossings near t_j.
        p: Process constants.
        s_i: Candidate boundary value at t_i.
        h: Grid step.
        min_records: Fewest records accepted.
        variance_floor: Smallest admissible conditional variance.

    Returns:
        The sample mean of erfc over the records.

    Raises:
        InsufficientRecords: if fewer than min_records records are given.
        DegenerateVariance: if the conditional variance is below the floor.
    """
    if not 1 <= j < i:
        raise ValueError(f"conditioning step j={j} must satisfy 1 <= j < i={i}")
    z = np.asarray(z, dtype=float)
    if z.size < min_records:
        raise InsufficientRecords(f"{z.size} crossing records near t={j * h:.6g}, need {min_records}")
    lag = (i - j) * h
    phi = transition_matrix(lag, p)
    centers = _conditional_centers(phi[0, 0], phi[0, 1], float(mean_at(lag, p)[0]), knots[j], z)
    scale = _scale(float(covariance_entries(lag, p)[0]), variance_floor, lag)
    return float(np.mean(_erfc_terms(s_i, centers, scale)))


class InverseSolver:
    """
    Step-by-step solver for one (process, target, configuration, seed).

    The grid is uniform, so the lag t_i - t_j = (i - j) h is again a grid time
    and every lag quantity (Phi, c1, Q11) is read from arrays tabulated once on
    the grid. Since X(0) = 0, c1(lag) coincides with m1(lag).
    """

    def __init__(self, p: ModelParams, d: TargetDistribution, cfg: SolverConfig, seed: int = 0):
        self.params = validate_params(p)
        self.target = d
        self.config = cfg
        self.seed = seed
        self.h = cfg.step
        self.n_steps = cfg.n_steps
        self.grid = self.h * np.arange(cfg.n_steps + 1)

        self.flags: List[str] = []
        self._flagged = set()
        self.weights = self._quadrature_weights()
        self.values = np.full(cfg.n_steps + 1, np.nan)
        self.residuals = np.zeros(cfg.n_steps + 1)
        self.theta_counts = np.zeros(cfg.n_steps + 1)

        phi = transition_matrix(self.grid, p)
        self._phi11 = phi[:, 0, 0]
        self._phi12 = phi[:, 0, 1]
        means = mean_at(self.grid, p)
        self._m1 = means[:, 0]
        self._m2 = means[:, 1]
        self._q11 = covariance_entries(self.grid, p)[0]
        self._base_window = int(math.floor(cfg.halfwidth / self.h + 1e-9))

        self._ensemble: Optional[PathEnsemble] = None
        self._refreshes = 0
        # X2 at crossing, per crossing step, gathered over the ensembles simulated so far
        self._pools: List[List[np.ndarray]] = [[] for _ in range(cfg.n_steps + 1)]
        self._pool_sizes = np.zeros(cfg.n_steps + 1, dtype=np.int64)
        self._records = np.empty(0)
        self._offsets = np.zeros(1, dtype=np.int64)
        self._lhs_scale = math.nan
        self._prepared = 0
        self._terms: Tuple[np.ndarray, np.ndarray, np.ndarray] = (np.empty(0), np.empty(0), np.empty(0))

    # --- setup ---

    def _quadrature_weights(self) -> np.ndarray:
        mass = self.config.quadrature == "mass"
        if not mass and self.target.singular_at_origin:
            # h f_T(t_1) misses most of the mass piled up near t = 0
            self._flag(("quadrature", 0), "density unbounded at t=0: weights taken as cdf increments")
            logger.warning(f"{describe(self.target)} has a density unbounded at t=0; using cdf-increment weights")
            mass = True
        if mass:
            cdf = np.asarray(self.target.cdf(self.grid), dtype=float)
            weights = np.concatenate(([0.0], np.diff(cdf)))
        else:
            weights = self.h * np.asarray(self.target.pdf(self.grid), dtype=float)
            weights[0] = 0.0
        if not np.all(np.isfinite(weights)):
            bad = int(np.flatnonzero(~np.isfinite(weights))[0])
            raise SolverError(f"target weight at t={self.grid[bad]:.6g} is not finite")
        return np.maximum(weights, 0.0)

    def _flag(self, key: Tuple, message: str) -> None:
        if key in self._flagged:
            return
        self._flagged.add(key)
        self.flags.append(message)
        logger.debug(f"Flag: {message}")

    def _lag_scale(self, k: int) -> float:
        return _scale(float(self._q11[k]), self.config.variance_floor, k * self.h)

    # --- crossing records ---

    def _pool(self, steps: np.ndarray, zs: np.ndarray, first: int, last: int) -> None:
        """Add the records of crossing steps first..last to every bin still short of the pool size."""
        order = np.argsort(steps, kind="stable")
        steps, zs = steps[order], zs[order]
        bounds = np.searchsorted(steps, np.arange(first, last + 2))
        target = self.config.pool_records_per_bin
        for j in range(first, last + 1):
            lo, hi = bounds[j - first], bounds[j - first + 1]
            if hi > lo and self._pool_sizes[j] < target:
                self._pools[j].append(zs[lo:hi])
                self._pool_sizes[j] += hi - lo

    def _refresh_records(self, i: int) -> None:
        """
        Bring the crossing records up to step i - 1 against the knots fixed so far.

        A crossing at step j only depends on the knots 1..j, so the records of
        every ensemble are draws from the same law and pool across refreshes.
        """
        if i == 1:
            return
        cfg = self.config
        if self._ensemble is None or (i - 2) % cfg.refresh_every == 0:
            self._refreshes += 1
            ensemble = PathEnsemble(self.params, self.h, cfg.mc_paths, self.seed, stream=self._refreshes)
            for k in range(1, i):
                ensemble.advance(self.values[k])
            self._ensemble = ensemble
            first = 1
        else:
            self._ensemble.advance(self.values[i - 1])
            first = i - 1

        steps, zs = self._ensemble.crossed_records()
        self._pool(steps, zs, first, i - 1)
        chunks = [chunk for j in range(1, i) for chunk in self._pools[j]]
        self._records = np.concatenate(chunks) if chunks else np.empty(0)
        self._offsets = np.concatenate(([0], np.cumsum(self._pool_sizes[:i])))

    def _window(self, i: int, j: int, width: int) -> np.ndarray:
        lo, hi = max(1, j - width), min(i - 1, j + width)
        return self._records[self._offsets[lo]:self._offsets[hi + 1]]

    def _nearest_populated(self, i: int, j: int) -> Optional[int]:
        minimum = self.config.min_records_per_bin
        candidates = np.arange(1, i)
        lo = np.maximum(1, candidates - self._base_window)
        hi = np.minimum(i - 1, candidates + self._base_window)
        counts = self._offsets[hi + 1] - self._offsets[lo]
        populated = candidates[counts >= minimum]
        if populated.size == 0:
            return None
        return int(populated[np.argmin(np.abs(populated - j))])

    def _select_records(self, i: int, j: int) -> Tuple[np.ndarray, str]:
        """
        Records of X2 used for the bin at t_j, and how they were obtained:
        'bin', 'widened', 'reused', 'sparse' or 'unconditioned'.
        """
        minimum = self.config.min_records_per_bin
        base = self._base_window
        z = self._records[:0]
        for width in range(base, max(base, MAX_BIN_WIDENING) + 1):
            z = self._window(i, j, width)
            if z.size >= minimum:
                return z, "bin" if width == base else "widened"
        t_j = self.grid[j]
        nearest = self._nearest_populated(i, j)
        if nearest is not None:
            self._flag(("reused", j), f"bin t={t_j:.6g}: reused the records of the bin at t={self.grid[nearest]:.6g}")
            return self._window(i, nearest, self._base_window), "reused"
        if z.size:
            self._flag(("sparse", j), f"bin t={t_j:.6g}: only {z.size} crossing records available")
            return z, "sparse"
        self._flag(("unconditioned", j), f"bin t={t_j:.6g}: no crossing records, used E[X2(t_j)]")
        return np.array([self._m2[j]]), "unconditioned"

    # --- the step equation ---

    def step_system(self, i: int) -> int:
        """
        Tabulate the memory terms of step i; returns the number of records used.

        Every (j, record) pair contributes weight w_j / n_j, center
        E[X1(t_i) | X(t_j) = (S_j, z)] and scale sqrt(2 Var[X1(t_i) | X(t_j)]).
        """
        if not 1 <= i <= self.n_steps:
            raise ValueError(f"step {i} is outside 1..{self.n_steps}")
        if np.any(np.isnan(self.values[1:i])):
            raise SolverError(f"step {i} needs the knots of steps 1..{i - 1}")
        centers, scales, weights = [], [], []
        used = 0
        for j in range(1, i):
            w = self.weights[j]
            if w == 0.0:
                continue
            z, kind = self._select_records(i, j)
            k = i - j
            centers.append(_conditional_centers(self._phi11[k], self._phi12[k], self._m1[k], self.values[j], z))
            scales.append(np.full(z.size, self._lag_scale(k)))
            weights.append(np.full(z.size, w / z.size))
            if kind != "unconditioned":
                used += z.size
        if centers:
            self._terms = (np.concatenate(centers), np.concatenate(scales), np.concatenate(weights))
        else:
            self._terms = (np.empty(0), np.empty(0), np.empty(0))
        self._lhs_scale = self._lag_scale(i)
        self._prepared = i
        return used

    def step_residual(self, s: float, i: int) -> float:
        """
        g(s) = erfc((s - m1(t_i)) / sqrt(2 Q11(t_i))) - [sum_{j<i} w_j theta_ij(s) + 2 w_i].
        """
        if self._prepared != i:
            self.step_system(i)
        centers, scales, weights = self._terms
        lhs = special.erfc((s - self._m1[i]) / self._lhs_scale)
        memory = np.sum(weights * _erfc_terms(s, centers, scales))
        return float(lhs - memory - 2.0 * self.weights[i])

    def _first_step(self) -> float:
        # without memory the step equation inverts in closed form
        self.step_system(1)
        argument = 2.0 * self.weights[1]
        clamped = min(max(argument, ERFCINV_CLAMP), 2.0 - ERFCINV_CLAMP)
        if clamped != argument:
            self._flag(
                ("clamped", 1),
                f"step 1: erfcinv argument 2*w_1={argument:.3g} clamped to {clamped:.3g}",
            )
            logger.warning(f"First step weight 2*w_1={argument:.3g} is outside (0, 2); clamped")
        return float(self._m1[1] + self._lhs_scale * special.erfcinv(clamped))

    def _bracket(self, i: int) -> Tuple[float, float]:
        center = self._m1[i]
        width = BRACKET_SDS * math.sqrt(self._q11[i])
        for _ in range(self.config.max_bracket_expansions + 1):
            lo, hi = center - width, center + width
            g_lo, g_hi = self.step_residual(lo, i), self.step_residual(hi, i)
            if not (math.isfinite(g_lo) and math.isfinite(g_hi)):
                raise SolverError(f"step residual is not finite at step {i} on [{lo:.6g}, {hi:.6g}]")
            if g_lo * g_hi <= 0.0:
                return lo, hi
            width *= 2.0
        raise NoBracket(i, float(self.grid[i]), lo, hi)

    def _solve_step(self, i: int) -> float:
        self.theta_counts[i] = self.step_system(i)
        lo, hi = self._bracket(i)
        return float(
            optimize.bisect(
                self.step_residual, lo, hi, args=(i,), xtol=self.config.root_tol, maxiter=BISECT_MAXITER
            )
        )

    # --- driver ---

    def run(self) -> BoundaryEstimate:
        """
        Solve for S(t_1), ..., S(t_N).

        Raises:
            InsufficientMass: if the target puts at most MIN_TARGET_MASS on [0, horizon].
            NoBracket: if some step equation has no sign change.
            DegenerateVariance: if Var[X1] vanishes (beta = 0).
        """
        cfg = self.config
        consumed = float(self.target.cdf(cfg.horizon))
        if consumed <= MIN_TARGET_MASS:
            raise InsufficientMass(
                f"target {describe(self.target)} has mass {consumed:.4f} on [0, {cfg.horizon:g}], "
                f"need more than {MIN_TARGET_MASS}"
            )
        logger.info(
            f"Solving for the boundary of {describe(self.target)}: horizon={cfg.horizon:g}, "
            f"N={cfg.n_steps}, M={cfg.mc_paths}, refresh_every={cfg.refresh_every}, seed={self.seed}"
        )
        started = time.perf_counter()
        report_every = max(1, self.n_steps // 10)

        for i in range(1, self.n_steps + 1):
            self._refresh_records(i)
            value = self._first_step() if i == 1 else self._solve_step(i)
            self.values[i] = value
            self.residuals[i] = self.step_residual(value, i)
            logger.debug(
                f"Step {i}: t={self.grid[i]:.6g}, S={value:.10g}, residual={self.residuals[i]:.3g}, "
                f"records={int(self.theta_counts[i])}"
            )
            if i % report_every == 0 or i == self.n_steps:
                logger.info(
                    f"Solver progress: {i}/{self.n_steps} steps ({100.0 * i / self.n_steps:.0f}%), "
                    f"{time.perf_counter() - started:.1f}s elapsed"
                )

        # the equation only constrains t >= t_1; S(0) continues S(t_1)
        self.values[0] = self.values[1]
        if self.flags:
            logger.warning(f"Solver finished with {len(self.flags)} flagged bins/steps")
        return BoundaryEstimate(
            grid=self.grid,
            values=self.values,
            residuals=self.residuals,
            theta_counts=self.theta_counts,
            mean_x1=self._m1,
            flags=self.flags,
            consumed_mass=consumed,
            seed=self.seed,
        )


def step_residual(s: float, i: int, solver: InverseSolver) -> float:
    """Residual of the step-i equation at the level s for a solver whose knots 1..i-1 are fixed."""
    return solver.step_residual(s, i)


def solve(p: ModelParams, d: TargetDistribution, cfg: SolverConfig, seed: int = 0) -> BoundaryEstimate:
    """
    Recover the boundary whose first-passage law under p is d on [0, cfg.horizon].

    Deterministic in (p, d, cfg, seed).
    """
    return InverseSolver(p, d, cfg, seed).run()
