"""
Error hierarchy for the ifpt2d package.

The command-line front end maps these families onto exit codes:
ConfigError/ParameterError -> 2, solver/simulation/data errors -> 3.
"""


class Ifpt2dError(Exception):
    """Base class for every error raised by ifpt2d."""


# --- Parameter validation ---

class ParameterError(Ifpt2dError, ValueError):
    """A model or distribution parameter violates its constraints."""


class NonPositiveAlpha(ParameterError):
    """The decay rate alpha must be strictly positive."""


class NonPositiveSigma(ParameterError):
    """The noise intensity sigma must be strictly positive."""


class NonFiniteParam(ParameterError):
    """A parameter is NaN or infinite."""


class NonPositiveInput(ParameterError):
    """A distribution constructor received a non-positive mean, CV or parameter."""


class OrderViolation(Ifpt2dError, ValueError):
    """A conditional moment was requested for t < theta."""


# --- Simulation ---

class SimulationError(Ifpt2dError):
    """Forward simulation could not be carried out."""


class BoundaryBelowStart(SimulationError):
    """The boundary starts below the initial position X1(0) = 0."""


# --- Inverse solver ---

class SolverError(Ifpt2dError):
    """The inverse boundary solver failed."""


class NoBracket(SolverError):
    """No sign change of the step residual was found at a grid step."""

    def __init__(self, step: int, time: float, lo: float, hi: float):
        self.step = step
        self.time = time
        super().__init__(
            f"No sign change of the step residual at step {step} (t={time:.6g}) "
            f"within [{lo:.6g}, {hi:.6g}]; the target density looks incompatible "
            f"with a boundary on this grid"
        )


class InsufficientMass(SolverError):
    """The target distribution (or a simulated sample) carries too little mass on [0, horizon]."""


class InsufficientRecords(SolverError):
    """Too few crossing records fell near a conditioning time."""


class DegenerateVariance(SolverError):
    """The variance of the first component is below the configured floor."""


# --- Transformation ---

class TransformError(Ifpt2dError):
    """The boundary-to-drift transformation failed."""


class TooFewKnots(TransformError):
    """At least three knots are needed to differentiate a boundary."""


# --- Files and configuration ---

class DataError(Ifpt2dError):
    """A result file is missing, malformed or inconsistent with the run configuration."""


class ConfigError(Ifpt2dError):
    """The run configuration could not be parsed or validated."""


class DegenerateCouplingWarning(UserWarning):
    """beta = 0: the first component carries no noise and stays at zero."""
