"""
Configuration management using Pydantic Settings.

Two layers:
  * ``Settings``: ambient, process-wide settings (logging, threads, paths) read
    from IFPT2D_* environment variables or a .env file.
  * ``RunConfig``: the description of one run (process, target, solver, ...),
    read from a flat key=value file with dotted section names such as
    ``process.alpha = 0.33`` or ``solver.n_steps = 200``.
"""
import logging
import math
from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from ifpt2d.exceptions import ConfigError, ParameterError
from ifpt2d.models import ModelParams
from ifpt2d.process.ou2d import validate_params
from ifpt2d.recipes import get_recipe
from ifpt2d.targets import distributions as dists

logger = logging.getLogger("IFPT2D.Config")

# --- Nested Configuration Models ---

class TargetConfig(BaseModel):
    """
    Target first-passage-time law: a family plus either raw parameters or (mean, cv).
    """
    model_config = ConfigDict(populate_by_name=True)

    family: Literal["inverse_gaussian", "heavy_tail_ig", "gamma", "exponential"]
    mean: Optional[float] = None
    cv: Optional[float] = None
    rho: Optional[float] = None
    lam: Optional[float] = Field(default=None, alias="lambda")
    kappa: Optional[float] = None
    rate: Optional[float] = None

    def build(self):
        """
        Construct the TargetDistribution.

        Raises:
            ConfigError: if the parameters needed by the family are missing or invalid.
        """
        def need(*names: str) -> None:
            for name in names:
                if getattr(self, "lam" if name == "lambda" else name) is None:
                    raise ConfigError(f"target.{name}: required for family '{self.family}'")

        try:
            if self.family == "inverse_gaussian":
                if self.mean is not None or self.cv is not None:
                    need("mean", "cv")
                    return dists.ig_from_mean_cv(self.mean, self.cv)
                need("rho", "lambda")
                return dists.InverseGaussian(rho=self.rho, lam=self.lam)
            if self.family == "heavy_tail_ig":
                need("lambda")
                return dists.HeavyTailIG(lam=self.lam)
            if self.family == "gamma":
                if self.mean is not None or self.cv is not None:
                    need("mean", "cv")
                    return dists.gamma_from_mean_cv(self.mean, self.cv)
                need("kappa", "rate")
                return dists.Gamma(kappa=self.kappa, gamma=self.rate)
            # exponential: the same Gamma code path with kappa = 1
            if self.rate is not None:
                return dists.exponential(self.rate)
            need("mean")
            if not (self.mean > 0.0 and math.isfinite(self.mean)):
                raise ConfigError(f"target.mean: must be positive, got {self.mean}")
            return dists.exponential(1.0 / self.mean)
        except ParameterError as e:
            raise ConfigError(f"target: {e}") from e
        except ValidationError as e:
            raise ConfigError(f"target: {_format_validation_error(e)}") from e


class SolverConfig(BaseModel):
    """Configuration for the inverse boundary solver."""
    horizon: float = Field(default=20.0, gt=0.0)       # Theta
    n_steps: int = Field(default=200, ge=1)            # N, grid step h = Theta / N
    mc_paths: int = Field(default=5000, ge=1)          # M paths per record refresh
    refresh_every: int = Field(default=1, ge=1)        # steps between fresh ensembles
    bin_halfwidth: Optional[float] = Field(default=None, gt=0.0)  # None -> h / 2
    min_records_per_bin: int = Field(default=50, ge=1)
    # bins keep collecting records from later refreshes until they hold this many
    pool_records_per_bin: int = Field(default=200, ge=1)
    root_tol: float = Field(default=1e-8, gt=0.0)
    max_bracket_expansions: int = Field(default=60, ge=1)
    variance_floor: float = Field(default=1e-300, gt=0.0)
    # euler: weights h f_T(t_j); mass: weights F(t_j) - F(t_{j-1})
    # densities unbounded at the origin always get mass weights
    quadrature: Literal["euler", "mass"] = "euler"

    @property
    def step(self) -> float:
        return self.horizon / self.n_steps

    @property
    def halfwidth(self) -> float:
        return self.bin_halfwidth if self.bin_halfwidth is not None else 0.5 * self.step


class VerifyConfig(BaseModel):
    """Forward round-trip check of a solved boundary."""
    n_paths: int = Field(default=100_000, ge=1)
    ks_threshold: float = Field(default=0.05, gt=0.0)
    sim_step: Optional[float] = Field(default=None, gt=0.0)  # None -> solver grid step


class TransformConfig(BaseModel):
    """Boundary-to-drift transformation and its equivalence check."""
    sigma_level: float = 4.0
    n_paths: int = Field(default=100_000, ge=1)
    ks_threshold: float = Field(default=0.02, gt=0.0)


class OutputConfig(BaseModel):
    """Where result files are written."""
    directory: Optional[str] = None  # None -> settings.output_dir


class RunConfig(BaseModel):
    """Everything one command needs."""
    process: ModelParams
    target: TargetConfig
    solver: SolverConfig = SolverConfig()
    verify: VerifyConfig = VerifyConfig()
    transform: TransformConfig = TransformConfig()
    seed: int = Field(default=0, ge=0)
    output: OutputConfig = OutputConfig()
    recipe: Optional[str] = None

    def output_dir(self) -> Path:
        return Path(self.output.directory or settings.output_dir)


# --- Main Settings Class ---

class Settings(BaseSettings):
    """
    Ambient application settings.
    Values are loaded from environment variables or .env file, with defaults provided.
    Nested values use a double underscore, e.g. IFPT2D_LOG_LEVEL=DEBUG.
    """
    model_config = SettingsConfigDict(
        env_prefix="IFPT2D_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        env_nested_delimiter="__",
        extra="ignore",
    )

    app_name: str = "IFPT2D"
    log_level: str = "INFO"
    log_dir: str = "logs"
    output_dir: str = "results"
    # threads used by batch simulations; results do not depend on it
    workers: int = Field(default=1, ge=1)


# --- Run configuration loading ---

def _format_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        loc = ".".join(str(part) for part in item["loc"])
        parts.append(f"{loc}: {item['msg']}" if loc else item["msg"])
    return "; ".join(parts)


def unflatten(flat: Mapping[str, Any]) -> Dict[str, Any]:
    """Turn {'process.alpha': '0.33'} into {'process': {'alpha': '0.33'}}."""
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        parts = key.strip().split(".")
        node = nested
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"{key}: '{part}' is both a value and a section")
            node = child
        if isinstance(node.get(parts[-1]), dict):
            raise ConfigError(f"{key}: '{parts[-1]}' is both a value and a section")
        node[parts[-1]] = value
    return nested


def read_config_file(path: Path) -> Dict[str, str]:
    """
    Read a flat key=value file with dotted keys.

    Raises:
        ConfigError: if the file is missing or a key has no value.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw = dotenv_values(path)
    missing = [key for key, value in raw.items() if value is None or value == ""]
    if missing:
        raise ConfigError(f"{missing[0]}: key has no value in {path}")
    logger.debug(f"Read {len(raw)} keys from {path}")
    return dict(raw)


def build_run_config(flat: Mapping[str, Any]) -> RunConfig:
    """
    Validate a flat dotted mapping into a RunConfig.

    Raises:
        ConfigError: naming the offending dotted field.
    """
    try:
        config = RunConfig(**unflatten(flat))
    except ValidationError as e:
        raise ConfigError(_format_validation_error(e)) from e
    try:
        validate_params(config.process)
    except ParameterError as e:
        raise ConfigError(str(e)) from e
    config.target.build()
    return config


def load_run_config(
    path: Optional[Path] = None,
    recipe: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """
    Assemble a RunConfig from a named recipe, a config file and explicit overrides,
    later sources winning.

    Args:
        path: Optional key=value config file.
        recipe: Optional recipe name from ``ifpt2d.recipes``.
        overrides: Dotted keys set last (CLI flags).

    Returns:
        The validated RunConfig.
    """
    flat: Dict[str, Any] = {}
    if recipe is not None:
        flat.update(get_recipe(recipe))
        flat["recipe"] = recipe
    if path is not None:
        flat.update(read_config_file(path))
    if overrides:
        flat.update({k: v for k, v in overrides.items() if v is not None})
    if not flat:
        raise ConfigError("no configuration given: pass --config and/or --recipe")
    return build_run_config(flat)


# --- Singleton Instance ---
# Create a single instance of Settings to be used throughout the application
settings = Settings()
