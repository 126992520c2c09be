import logging
import math
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Create a logger for this module
logger = logging.getLogger("IFPT2D.Models")

# Absolute slack on det(cov) absorbing roundoff in the closed-form entries.
COV_DET_TOL = 1e-12


def _as_float_array(value) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a one-dimensional sequence, got shape {arr.shape}")
    return arr


class ModelParams(BaseModel):
    """
    The four constants of the two-compartment Ornstein-Uhlenbeck system.

    dX1 = {-alpha X1 + beta (X2 - X1)} dt
    dX2 = {-alpha X2 + beta (X1 - X2) + mu} dt + sigma dB

    Construction performs no range checks; use
    ``ifpt2d.process.ou2d.validate_params`` to enforce alpha > 0 and sigma > 0.
    """
    model_config = ConfigDict(frozen=True)

    alpha: float  # decay rate, 1/time
    beta: float   # coupling rate, 1/time
    mu: float     # mean input rate, space/time
    sigma: float  # noise intensity, space/sqrt(time)

    @property
    def is_degenerate(self) -> bool:
        """True when beta = 0 and the first component is identically zero."""
        return self.beta == 0.0

    def shifted(self, **changes) -> "ModelParams":
        """Return a copy with some constants replaced."""
        return self.model_copy(update=changes)


class State2(BaseModel):
    """Position of both compartments at one instant."""
    model_config = ConfigDict(frozen=True)

    x1: float  # trigger component
    x2: float  # dendritic component

    @field_validator("x1", "x2")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("state components must be finite")
        return v

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2])


class Moments2(BaseModel):
    """Mean vector and covariance matrix of the bivariate Gaussian law of X(t)."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    mean: np.ndarray
    cov: np.ndarray

    @field_validator("mean", mode="before")
    @classmethod
    def _mean_shape(cls, v) -> np.ndarray:
        arr = np.asarray(v, dtype=float)
        if arr.shape != (2,):
            raise ValueError(f"mean must be a 2-vector, got shape {arr.shape}")
        return arr

    @field_validator("cov", mode="before")
    @classmethod
    def _cov_shape(cls, v) -> np.ndarray:
        arr = np.asarray(v, dtype=float)
        if arr.shape != (2, 2):
            raise ValueError(f"cov must be 2x2, got shape {arr.shape}")
        return arr

    @model_validator(mode="after")
    def _covariance_is_valid(self) -> "Moments2":
        cov = self.cov
        if cov[0, 1] != cov[1, 0]:
            raise ValueError("covariance matrix must be symmetric")
        if cov[0, 0] < 0.0 or cov[1, 1] < 0.0:
            raise ValueError("covariance diagonal must be non-negative")
        if np.linalg.det(cov) < -COV_DET_TOL:
            raise ValueError("covariance determinant is negative beyond roundoff")
        return self


class PiecewiseLinearBoundary(BaseModel):
    """
    Boundary given by knots, linearly interpolated between them and held
    constant after the last knot.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    knot_times: np.ndarray
    knot_values: np.ndarray

    @field_validator("knot_times", "knot_values", mode="before")
    @classmethod
    def _coerce(cls, v) -> np.ndarray:
        return _as_float_array(v)

    @model_validator(mode="after")
    def _check_knots(self) -> "PiecewiseLinearBoundary":
        if self.knot_times.size == 0:
            raise ValueError("a boundary needs at least one knot")
        if self.knot_times.size != self.knot_values.size:
            raise ValueError("knot_times and knot_values differ in length")
        if self.knot_times[0] != 0.0:
            raise ValueError("the first knot must sit at t = 0")
        if np.any(np.diff(self.knot_times) <= 0.0):
            raise ValueError("knot_times must be strictly increasing")
        if not np.all(np.isfinite(self.knot_values)):
            raise ValueError("knot_values must be finite")
        return self

    @classmethod
    def constant(cls, level: float) -> "PiecewiseLinearBoundary":
        return cls(knot_times=[0.0], knot_values=[level])

    def __call__(self, t):
        return np.interp(t, self.knot_times, self.knot_values)

    def shifted(self, offset: float) -> "PiecewiseLinearBoundary":
        return PiecewiseLinearBoundary(knot_times=self.knot_times, knot_values=self.knot_values + offset)


class CrossingRecord(BaseModel):
    """A simulated first up-crossing of X1 and the value of X2 at that step."""
    model_config = ConfigDict(frozen=True)

    step: int       # grid index k of the crossing
    t_cross: float  # grid time t_k
    z: float        # X2(t_k)


class FptSampleSet(BaseModel):
    """Simulated first-passage times of a batch of paths, censored at the horizon."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    times: np.ndarray
    censored_count: int = Field(ge=0)
    horizon: float
    seed: int

    @field_validator("times", mode="before")
    @classmethod
    def _coerce(cls, v) -> np.ndarray:
        return _as_float_array(v)

    @model_validator(mode="after")
    def _within_horizon(self) -> "FptSampleSet":
        if self.times.size and self.times.max() > self.horizon * (1.0 + 1e-12):
            raise ValueError("crossing times exceed the horizon")
        return self

    @property
    def n_paths(self) -> int:
        return int(self.times.size) + self.censored_count

    @property
    def censored_fraction(self) -> float:
        return self.censored_count / self.n_paths if self.n_paths else 0.0

    def ecdf(self, t) -> np.ndarray:
        """Empirical sub-distribution P(T <= t) over all paths, censored ones included."""
        ordered = np.sort(self.times)
        return np.searchsorted(ordered, np.asarray(t, dtype=float), side="right") / max(self.n_paths, 1)


class BoundaryEstimate(BaseModel):
    """
    Boundary values S*(t_i) on the solver grid together with per-step diagnostics.

    Index 0 is t_0 = 0, where S(0) is reported as S*(t_1).
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: np.ndarray
    values: np.ndarray
    residuals: np.ndarray
    theta_counts: np.ndarray
    mean_x1: np.ndarray
    flags: List[str] = []
    consumed_mass: float = 0.0
    seed: Optional[int] = None

    @field_validator("grid", "values", "residuals", "theta_counts", "mean_x1", mode="before")
    @classmethod
    def _coerce(cls, v) -> np.ndarray:
        return _as_float_array(v)

    @model_validator(mode="after")
    def _aligned(self) -> "BoundaryEstimate":
        n = self.grid.size
        for name in ("values", "residuals", "theta_counts", "mean_x1"):
            if getattr(self, name).size != n:
                raise ValueError(f"diagnostic array '{name}' does not match the grid length {n}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("boundary values must be finite")
        return self

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0]) if self.grid.size > 1 else 0.0

    def as_boundary(self) -> PiecewiseLinearBoundary:
        return PiecewiseLinearBoundary(knot_times=self.grid, knot_values=self.values)

    def __call__(self, t):
        return np.interp(t, self.grid, self.values)

    def mean_intersections(self) -> List[Tuple[float, float]]:
        """
        Grid intervals where S*(t) - E[X1(t)] changes sign, as (time, level) pairs
        found by linear interpolation.
        """
        gap = self.values - self.mean_x1
        found = []
        for i in range(1, gap.size):
            if gap[i - 1] == 0.0 or gap[i - 1] * gap[i] < 0.0:
                w = gap[i - 1] / (gap[i - 1] - gap[i]) if gap[i - 1] != gap[i] else 0.0
                t = self.grid[i - 1] + w * (self.grid[i] - self.grid[i - 1])
                found.append((float(t), float(np.interp(t, self.grid, self.values))))
        return found


class DriftSchedule(BaseModel):
    """
    Time-dependent input M(t) = (mu1, mu2) that, with the constant threshold
    sigma_level, reproduces the first-passage law of a time-dependent boundary.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
    sigma_level: float
    y0: Tuple[float, float]

    @field_validator("grid", "mu1", "mu2", mode="before")
    @classmethod
    def _coerce(cls, v) -> np.ndarray:
        return _as_float_array(v)

    @model_validator(mode="after")
    def _aligned(self) -> "DriftSchedule":
        if not (self.grid.size == self.mu1.size == self.mu2.size):
            raise ValueError("drift schedule arrays are not aligned with the grid")
        if not (np.all(np.isfinite(self.mu1)) and np.all(np.isfinite(self.mu2))):
            raise ValueError("drift values must be finite")
        return self

    def input_at(self, t) -> Tuple[np.ndarray, np.ndarray]:
        """Linear interpolation of both input components, held constant past the grid ends."""
        return np.interp(t, self.grid, self.mu1), np.interp(t, self.grid, self.mu2)


# --- Run reports ---

class GridInfo(BaseModel):
    """The solver partition of [0, horizon]."""
    horizon: float
    n_steps: int
    step: float


class SolveSummary(BaseModel):
    """
    Run summary written next to the boundary CSV.
    """
    params: ModelParams
    target: Dict[str, Any]
    seed: int
    grid: GridInfo
    solver: Dict[str, Any]
    consumed_mass: float
    wall_seconds: float
    flags: List[str] = []
    quantiles: Dict[str, float] = {}       # target quantiles, e.g. {"0.5": 3.7}
    mean_intersections: List[Tuple[float, float]] = []
    recipe: Optional[str] = None
    generated_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))


class VerifyReport(BaseModel):
    """Outcome of a forward round trip through a solved boundary."""
    params: ModelParams
    target: Dict[str, Any]
    seed: int
    grid: GridInfo
    boundary_file: str
    n_paths: int
    sim_step: float
    ks: float
    ks_threshold: float
    passed: bool
    censored_fraction: float
    expected_censored_mass: float
    wall_seconds: float
    generated_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))


class TransformReport(BaseModel):
    """Equivalence check between the original and the transformed system."""
    params: ModelParams
    seed: int
    grid: GridInfo
    boundary_file: str
    sigma_level: float
    y0: Tuple[float, float]
    n_paths: int
    ks: float
    pvalue: float
    ks_threshold: float
    passed: bool
    censored_fraction_original: float
    censored_fraction_transformed: float
    expected_censored_mass: float
    wall_seconds: float
    generated_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
