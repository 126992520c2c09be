"""
Exact simulation of the two-compartment process and first-passage detection.

Paths advance with the exact transition kernel, X_{k+1} = Phi X_k + c + L xi_k,
so the discrete skeleton has the law of the continuous process at the grid
times for any step h. Crossings are detected on the grid: the first k with
X1(t_k) > S(t_k).
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np

from ifpt2d.exceptions import BoundaryBelowStart
from ifpt2d.models import CrossingRecord, FptSampleSet, ModelParams, PiecewiseLinearBoundary
from ifpt2d.process.ou2d import innovation_factor, transition
from ifpt2d.simulation.rng import PATHS_PER_BLOCK, block_count, block_generator, block_of

logger = logging.getLogger("IFPT2D.Simulator")


class PathEnsemble:
    """
    A set of paths advanced together, one grid step at a time.

    The ensemble covers the contiguous blocks starting at ``first_block``; path
    ``i`` of the ensemble is global path ``first_block * PATHS_PER_BLOCK + i``.
    Paths keep evolving after they cross, but only the first crossing is recorded.
    """

    def __init__(
        self,
        p: ModelParams,
        h: float,
        n_paths: int,
        seed: int,
        stream: int = 0,
        first_block: int = 0,
        x0: Tuple[float, float] = (0.0, 0.0),
    ):
        if h <= 0.0:
            raise ValueError(f"simulation step must be positive, got {h}")
        if n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {n_paths}")
        self.params = p
        self.h = h
        self.n_paths = n_paths
        self.phi, self.increment, _ = transition(h, p)
        self.factor = innovation_factor(h, p)
        self._generators = [
            block_generator(seed, stream, first_block + b) for b in range(block_count(n_paths))
        ]
        self.x1 = np.full(n_paths, float(x0[0]))
        self.x2 = np.full(n_paths, float(x0[1]))
        self.alive = np.ones(n_paths, dtype=bool)
        self.cross_step = np.full(n_paths, -1, dtype=np.int64)
        self.cross_z = np.full(n_paths, np.nan)
        self.step = 0

    @property
    def n_alive(self) -> int:
        return int(np.count_nonzero(self.alive))

    def _draw(self) -> np.ndarray:
        blocks = [g.standard_normal((PATHS_PER_BLOCK, 2)) for g in self._generators]
        return np.concatenate(blocks)[: self.n_paths]

    def advance(self, level: float, increment: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Move every path one step and record first crossings of ``level``.

        Args:
            level: Boundary value at the new grid time.
            increment: Deterministic increment for this step; defaults to c(h).

        Returns:
            Indices of the paths that crossed at this step.
        """
        xi = self._draw()
        inc = self.increment if increment is None else increment
        (f11, f12), (f21, f22) = self.phi
        l11, l21, l22 = self.factor[0, 0], self.factor[1, 0], self.factor[1, 1]
        x1, x2 = self.x1, self.x2
        new1 = f11 * x1 + f12 * x2 + inc[0] + l11 * xi[:, 0]
        new2 = f21 * x1 + f22 * x2 + inc[1] + (l21 * xi[:, 0] + l22 * xi[:, 1])
        self.x1, self.x2 = new1, new2
        self.step += 1

        crossed = np.flatnonzero(self.alive & (new1 > level))
        self.cross_step[crossed] = self.step
        self.cross_z[crossed] = new2[crossed]
        self.alive[crossed] = False
        return crossed

    def crossed_records(self) -> Tuple[np.ndarray, np.ndarray]:
        """(crossing steps, X2 at crossing) of the crossed paths, in path order."""
        mask = self.cross_step > 0
        return self.cross_step[mask], self.cross_z[mask]


def grid_size(horizon: float, h: float) -> int:
    """Number of steps of length h that fit in [0, horizon]."""
    return int(math.floor(horizon / h + 1e-9))


def _check_start(b: PiecewiseLinearBoundary, x0: float = 0.0) -> None:
    if float(b(0.0)) < x0:
        raise BoundaryBelowStart(f"boundary starts at {float(b(0.0)):g}, below the initial position {x0:g}")


def _run_chunk(
    p: ModelParams,
    h: float,
    levels: np.ndarray,
    increments: Optional[np.ndarray],
    n_paths: int,
    seed: int,
    stream: int,
    first_block: int,
    x0: Tuple[float, float],
) -> Tuple[np.ndarray, np.ndarray]:
    ensemble = PathEnsemble(p, h, n_paths, seed, stream=stream, first_block=first_block, x0=x0)
    for k in range(levels.size):
        ensemble.advance(levels[k], None if increments is None else increments[k])
        if ensemble.n_alive == 0:
            break
    return ensemble.cross_step, ensemble.cross_z


def first_passage_steps(
    p: ModelParams,
    h: float,
    levels: np.ndarray,
    n_paths: int,
    seed: int,
    stream: int = 0,
    workers: int = 1,
    x0: Tuple[float, float] = (0.0, 0.0),
    increments: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Crossing step (or -1) and X2 at crossing for every path of a batch.

    Args:
        p: Process constants.
        h: Simulation step.
        levels: Boundary values at t_1 .. t_n.
        n_paths: Number of paths.
        seed: Root seed.
        stream: Stream identifier, see ``ifpt2d.simulation.rng``.
        workers: Threads used; the result does not depend on it.
        x0: Initial state.
        increments: Optional (n, 2) per-step deterministic increments replacing c(h).

    Returns:
        (cross_step, cross_z), both of length n_paths.
    """
    levels = np.asarray(levels, dtype=float)
    n_blocks = block_count(n_paths)
    groups = [g for g in np.array_split(np.arange(n_blocks), max(1, min(workers, n_blocks))) if g.size]
    chunks = []
    for g in groups:
        first = int(g[0])
        size = min(n_paths, (int(g[-1]) + 1) * PATHS_PER_BLOCK) - first * PATHS_PER_BLOCK
        chunks.append((first, size))

    def run(chunk):
        first, size = chunk
        return _run_chunk(p, h, levels, increments, size, seed, stream, first, x0)

    if len(chunks) == 1:
        results = [run(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            results = list(pool.map(run, chunks))
    return np.concatenate([r[0] for r in results]), np.concatenate([r[1] for r in results])


def simulate_path(
    p: ModelParams,
    h: float,
    n_steps: int,
    seed: int,
    stream: int = 0,
    path_index: int = 0,
    x0: Tuple[float, float] = (0.0, 0.0),
) -> np.ndarray:
    """
    Exact-in-law skeleton X(t_0), ..., X(t_n) of one path.

    The noise is the one path ``path_index`` sees in any batch with the same
    (seed, stream).

    Returns:
        Array of shape (n_steps + 1, 2).
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    local = path_index % PATHS_PER_BLOCK
    ensemble = PathEnsemble(p, h, local + 1, seed, stream=stream, first_block=block_of(path_index), x0=x0)
    path = np.empty((n_steps + 1, 2))
    path[0] = x0
    for k in range(1, n_steps + 1):
        ensemble.advance(math.inf)
        path[k] = ensemble.x1[local], ensemble.x2[local]
    return path


def sample_fpt(
    p: ModelParams,
    b: PiecewiseLinearBoundary,
    horizon: float,
    h: float,
    seed: int,
    stream: int = 0,
    path_index: int = 0,
) -> Optional[float]:
    """
    First grid time at which X1 exceeds the boundary, or None when the path is
    censored at the horizon.

    Raises:
        BoundaryBelowStart: if b(0) < 0.
    """
    _check_start(b)
    n_steps = grid_size(horizon, h)
    levels = b(h * np.arange(1, n_steps + 1))
    local = path_index % PATHS_PER_BLOCK
    steps, _ = _run_chunk(p, h, levels, None, local + 1, seed, stream, block_of(path_index), (0.0, 0.0))
    return float(steps[local] * h) if steps[local] > 0 else None


def batch_fpt(
    p: ModelParams,
    b: PiecewiseLinearBoundary,
    horizon: float,
    h: float,
    n_paths: int,
    seed: int,
    stream: int = 0,
    workers: int = 1,
) -> FptSampleSet:
    """
    First-passage times of n_paths independent paths through b on [0, horizon].

    Bit-identical for fixed (seed, stream, h, n_paths) whatever ``workers`` is.

    Raises:
        BoundaryBelowStart: if b(0) < 0.
    """
    _check_start(b)
    n_steps = grid_size(horizon, h)
    levels = b(h * np.arange(1, n_steps + 1))
    logger.debug(f"Simulating {n_paths} paths over {n_steps} steps (h={h:g}, seed={seed}, workers={workers})")
    steps, _ = first_passage_steps(p, h, levels, n_paths, seed, stream=stream, workers=workers)
    crossed = steps > 0
    sample = FptSampleSet(
        times=steps[crossed] * h,
        censored_count=int(np.count_nonzero(~crossed)),
        horizon=horizon,
        seed=seed,
    )
    logger.info(
        f"Forward simulation: {sample.times.size}/{n_paths} paths crossed before t={horizon:g} "
        f"(censored fraction {sample.censored_fraction:.4f})"
    )
    return sample


def collect_crossing_records(
    p: ModelParams,
    b: PiecewiseLinearBoundary,
    horizon: float,
    h: float,
    n_paths: int,
    seed: int,
    stream: int = 0,
    workers: int = 1,
) -> List[CrossingRecord]:
    """One CrossingRecord (step, time, X2) per path that crossed before the horizon."""
    _check_start(b)
    n_steps = grid_size(horizon, h)
    levels = b(h * np.arange(1, n_steps + 1))
    steps, zs = first_passage_steps(p, h, levels, n_paths, seed, stream=stream, workers=workers)
    return [
        CrossingRecord(step=int(k), t_cross=float(k * h), z=float(z))
        for k, z in zip(steps, zs)
        if k > 0
    ]
