"""
Command-line entry point.

    ifpt2d solve     --config run.env            boundary.csv + solve_summary.json
    ifpt2d verify    --config run.env            verify_report.json, exit 4 when KS fails
    ifpt2d transform --config run.env            drift.csv + transform_report.json
    ifpt2d moments   --config run.env --times .. table of m(t), Q(t) on stdout
    ifpt2d recipes                               list the named recipes
"""
import argparse
import logging
import os
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from ifpt2d.config import RunConfig, load_run_config, settings
from ifpt2d.exceptions import (
    ConfigError,
    DataError,
    ParameterError,
    SimulationError,
    SolverError,
    TransformError,
)
from ifpt2d.models import GridInfo, SolveSummary, TransformReport, VerifyReport
from ifpt2d.process.ou2d import covariance_entries, isometry_quadrature, mean_at
from ifpt2d.recipes import list_recipes
from ifpt2d.simulation.simulator import batch_fpt, grid_size
from ifpt2d.solver.inverse import solve
from ifpt2d.storage.results import ResultStore
from ifpt2d.transform.drift import simulate_transformed, to_drift
from ifpt2d.utils.goodness import censored_ks_distance, two_sample_ks

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_FAILURE = 3
EXIT_VERIFICATION = 4

BOUNDARY_FILE = "boundary.csv"
DRIFT_FILE = "drift.csv"
SUMMARY_FILE = "solve_summary.json"
VERIFY_FILE = "verify_report.json"
TRANSFORM_FILE = "transform_report.json"
QUANTILE_LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)
DEFAULT_MOMENT_TIMES = [0.0, 0.5, 1.0, 5.0]

logger = logging.getLogger("IFPT2D.CLI")


# --- Logging Configuration ---

def configure_logging() -> logging.Logger:
    """Console handler at settings.log_level plus a DEBUG file under settings.log_dir."""
    root = logging.getLogger("IFPT2D")
    root.setLevel(logging.DEBUG)
    if root.hasHandlers():
        return root

    log_format = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(settings.log_level.upper())
    console_handler.setFormatter(log_format)
    root.addHandler(console_handler)

    try:
        os.makedirs(settings.log_dir, exist_ok=True)
        file_handler = logging.FileHandler(os.path.join(settings.log_dir, "ifpt2d.log"))
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(log_format)
        root.addHandler(file_handler)
    except OSError as e:
        root.warning(f"File logging disabled, could not open {settings.log_dir}: {e}")
    return root


# --- Helpers ---

def _overrides(args: argparse.Namespace, section: Optional[str] = None) -> Dict[str, object]:
    values: Dict[str, object] = {"seed": args.seed, "output.directory": args.out}
    if section is not None:
        values[f"{section}.ks_threshold"] = getattr(args, "ks_threshold", None)
    if getattr(args, "sigma_level", None) is not None:
        values["transform.sigma_level"] = args.sigma_level
    return values


def _load(args: argparse.Namespace, section: Optional[str] = None) -> RunConfig:
    config = load_run_config(args.config, recipe=args.recipe, overrides=_overrides(args, section))
    logger.info(
        f"Configuration: process={config.process.model_dump()}, target={config.target.family}, "
        f"seed={config.seed}, output={config.output_dir()}"
    )
    return config


def _workers(args: argparse.Namespace) -> int:
    return args.workers if args.workers is not None else settings.workers


def _grid_info(config: RunConfig) -> GridInfo:
    return GridInfo(horizon=config.solver.horizon, n_steps=config.solver.n_steps, step=config.solver.step)


def _boundary_path(args: argparse.Namespace, config: RunConfig) -> Path:
    return Path(args.boundary) if args.boundary else config.output_dir() / BOUNDARY_FILE


def _load_boundary(args: argparse.Namespace, config: RunConfig):
    path = _boundary_path(args, config)
    boundary = ResultStore.load_boundary(path, config.process)
    horizon = config.solver.horizon
    if abs(boundary.horizon - horizon) > 1e-9 * max(horizon, 1.0):
        raise DataError(f"{path} ends at t={boundary.horizon:.17g}, the configured horizon is {horizon:.17g}")
    return path, boundary


# --- Commands ---

def cmd_solve(args: argparse.Namespace) -> int:
    config = _load(args)
    target = config.target.build()
    started = time.perf_counter()
    boundary = solve(config.process, target, config.solver, seed=config.seed)
    wall = time.perf_counter() - started

    out = config.output_dir()
    ResultStore.save_boundary(boundary, out / BOUNDARY_FILE)
    quantiles = {f"{q:g}": target.quantile(q) for q in QUANTILE_LEVELS}
    summary = SolveSummary(
        params=config.process,
        target=target.model_dump(),
        seed=config.seed,
        grid=_grid_info(config),
        solver=config.solver.model_dump(),
        consumed_mass=boundary.consumed_mass,
        wall_seconds=wall,
        flags=boundary.flags,
        quantiles=quantiles,
        mean_intersections=boundary.mean_intersections(),
        recipe=config.recipe,
    )
    ResultStore.save_report(summary, out / SUMMARY_FILE)
    logger.info(f"Solved {boundary.grid.size - 1} steps in {wall:.1f}s; consumed mass {boundary.consumed_mass:.4f}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    config = _load(args, "verify")
    target = config.target.build()
    path, boundary = _load_boundary(args, config)
    h = config.verify.sim_step or boundary.step
    horizon = config.solver.horizon
    started = time.perf_counter()
    sample = batch_fpt(
        config.process, boundary.as_boundary(), horizon, h,
        config.verify.n_paths, config.seed, stream=0, workers=_workers(args),
    )
    grid = h * np.arange(1, grid_size(horizon, h) + 1)
    ks = censored_ks_distance(sample, target, grid=grid)
    passed = ks <= config.verify.ks_threshold
    report = VerifyReport(
        params=config.process,
        target=target.model_dump(),
        seed=config.seed,
        grid=_grid_info(config),
        boundary_file=str(path),
        n_paths=config.verify.n_paths,
        sim_step=h,
        ks=ks,
        ks_threshold=config.verify.ks_threshold,
        passed=passed,
        censored_fraction=sample.censored_fraction,
        expected_censored_mass=1.0 - float(target.cdf(horizon)),
        wall_seconds=time.perf_counter() - started,
    )
    ResultStore.save_report(report, config.output_dir() / VERIFY_FILE)
    if not passed:
        logger.error(f"Verification failed: KS={ks:.4f} > {config.verify.ks_threshold}")
        return EXIT_VERIFICATION
    logger.info(f"Verification passed: KS={ks:.4f} <= {config.verify.ks_threshold}")
    return EXIT_OK


def cmd_transform(args: argparse.Namespace) -> int:
    config = _load(args, "transform")
    target = config.target.build()
    path, boundary = _load_boundary(args, config)
    p, h, horizon = config.process, boundary.step, config.solver.horizon
    n_paths, workers = config.transform.n_paths, _workers(args)
    started = time.perf_counter()

    schedule = to_drift(boundary, config.transform.sigma_level, p)
    ResultStore.save_drift(schedule, config.output_dir() / DRIFT_FILE)
    original = batch_fpt(p, boundary.as_boundary(), horizon, h, n_paths, config.seed, stream=0, workers=workers)
    transformed = simulate_transformed(schedule, p, h, horizon, n_paths, config.seed, stream=0, workers=workers)
    ks, pvalue = two_sample_ks(original, transformed)
    passed = ks <= config.transform.ks_threshold
    report = TransformReport(
        params=p,
        seed=config.seed,
        grid=_grid_info(config),
        boundary_file=str(path),
        sigma_level=schedule.sigma_level,
        y0=schedule.y0,
        n_paths=n_paths,
        ks=ks,
        pvalue=pvalue,
        ks_threshold=config.transform.ks_threshold,
        passed=passed,
        censored_fraction_original=original.censored_fraction,
        censored_fraction_transformed=transformed.censored_fraction,
        expected_censored_mass=1.0 - float(target.cdf(horizon)),
        wall_seconds=time.perf_counter() - started,
    )
    ResultStore.save_report(report, config.output_dir() / TRANSFORM_FILE)
    if not passed:
        logger.error(f"Transformed system differs: two-sample KS={ks:.4f} > {config.transform.ks_threshold}")
        return EXIT_VERIFICATION
    logger.info(f"Transformed system equivalent: two-sample KS={ks:.4f} (p={pvalue:.3g})")
    return EXIT_OK


def moments_table(config: RunConfig, times: List[float]) -> List[str]:
    """Lines of the moments table: t, m1, m2, Q11, Q12, Q22 and the quadrature relative error."""
    p = config.process
    lines = ["t\tm1\tm2\tQ11\tQ12\tQ22\tquad_rel_err"]
    for t in times:
        if t < 0.0:
            raise ConfigError(f"times: moments need t >= 0, got {t}")
        m1, m2 = (float(v) for v in mean_at(t, p))
        q11, q12, q22 = (float(v) for v in covariance_entries(t, p))
        closed = np.array([q11, q12, q22])
        if t > 0.0:
            quad = isometry_quadrature(t, p)
            numeric = np.array([quad[0, 0], quad[0, 1], quad[1, 1]])
            error = float(np.max(np.abs(closed - numeric) / np.maximum(np.abs(numeric), np.finfo(float).tiny)))
        else:
            error = 0.0
        lines.append("\t".join(format(v, ".10g") for v in (t, m1, m2, q11, q12, q22, error)))
    return lines


def cmd_moments(args: argparse.Namespace) -> int:
    config = _load(args)
    for line in moments_table(config, args.times or DEFAULT_MOMENT_TIMES):
        print(line)
    return EXIT_OK


def cmd_recipes(args: argparse.Namespace) -> int:
    for recipe in list_recipes():
        print(f"{recipe.name:<28} {recipe.description}")
    return EXIT_OK


# --- Argument parsing ---

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ifpt2d",
        description="Inverse first-passage-time boundaries of the two-compartment OU model",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    def run_command(name: str, help_text: str, handler) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--config", type=Path, help="key=value run file with dotted keys (process.alpha=...)")
        sub.add_argument("--recipe", help="named parameter set, see 'ifpt2d recipes'; the config file overrides it")
        sub.add_argument("--seed", type=int, help="root seed (overrides the config)")
        sub.add_argument("--out", help="output directory (overrides the config)")
        sub.add_argument("--workers", type=int, help="threads for forward simulations")
        sub.set_defaults(handler=handler)
        return sub

    run_command("solve", "solve for the boundary and write boundary.csv", cmd_solve)
    for name, help_text, handler in (
        ("verify", "forward-simulate through a boundary and test the FPT law", cmd_verify),
        ("transform", "turn a boundary into a time-dependent input with a constant threshold", cmd_transform),
    ):
        sub = run_command(name, help_text, handler)
        sub.add_argument("--boundary", help="boundary CSV (default: <out>/boundary.csv)")
        sub.add_argument("--ks-threshold", type=float, help="largest accepted KS distance")
        if name == "transform":
            sub.add_argument("--sigma-level", type=float, help="constant threshold of the transformed system")
    moments = run_command("moments", "print the closed-form moments at given times", cmd_moments)
    moments.add_argument("--times", type=float, nargs="+", help="times at which to print the moments")

    recipes = commands.add_parser("recipes", help="list the named recipes")
    recipes.set_defaults(handler=cmd_recipes)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        return args.handler(args)
    except (ConfigError, ParameterError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except (SolverError, SimulationError, TransformError, DataError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_FAILURE
    except Exception as e:
        logger.error(f"Application failed with error: {e}", exc_info=True)
        return EXIT_UNEXPECTED


# --- Main Execution Block ---
# This allows the script to be run directly: `python -m ifpt2d.main`
if __name__ == "__main__":
    sys.exit(main())
