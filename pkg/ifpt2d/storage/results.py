"""Result file service: boundary and drift CSVs, JSON run reports."""

import csv
import logging
import math
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel

from ifpt2d.exceptions import DataError
from ifpt2d.models import BoundaryEstimate, DriftSchedule, ModelParams
from ifpt2d.process.ou2d import mean_at

logger = logging.getLogger("IFPT2D.Storage")

BOUNDARY_COLUMNS = ["t", "S", "residual", "theta_bin_count"]
DRIFT_COLUMNS = ["t", "mu1", "mu2"]
# relative slack when checking that a file's grid is uniform
GRID_TOLERANCE = 1e-9

PathLike = Union[str, Path]


def format_float(value: float) -> str:
    """17 significant digits; -0.0 is written as 0."""
    return format(float(value) + 0.0, ".17g")


class ResultStore:
    """Reading and writing of result files"""

    @staticmethod
    def _write_rows(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[str]]) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", newline="", encoding="utf-8") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(header)
                writer.writerows(rows)
        except OSError as e:
            logger.error(f"Could not write {path}: {e}")
            raise DataError(f"could not write {path}: {e}") from e
        return path

    @staticmethod
    def save_boundary(b: BoundaryEstimate, path: PathLike) -> Path:
        """Write the boundary CSV (t, S, residual, theta_bin_count), one row per grid point.

        Args:
            b: Solved boundary
            path: Destination file

        Returns:
            The path written
        """
        rows = (
            [format_float(t), format_float(s), format_float(r), str(int(n))]
            for t, s, r, n in zip(b.grid, b.values, b.residuals, b.theta_counts)
        )
        written = ResultStore._write_rows(path, BOUNDARY_COLUMNS, rows)
        logger.info(f"Saved boundary with {b.grid.size} knots to {written}")
        return written

    @staticmethod
    def load_boundary(path: PathLike, p: Optional[ModelParams] = None) -> BoundaryEstimate:
        """Read a boundary CSV written by save_boundary.

        Args:
            path: Boundary file
            p: Process constants used to fill mean_x1; NaN when omitted

        Returns:
            The boundary with its per-step diagnostics

        Raises:
            DataError: if the file is missing, malformed or its grid is not uniform
        """
        path = Path(path)
        if not path.is_file():
            raise DataError(f"boundary file not found: {path}")
        try:
            with path.open(newline="", encoding="utf-8") as handle:
                reader = csv.reader(handle)
                header = next(reader, None)
                if header != BOUNDARY_COLUMNS:
                    raise DataError(f"{path}: expected header {','.join(BOUNDARY_COLUMNS)}, got {header}")
                rows: List[List[float]] = []
                for line_no, row in enumerate(reader, start=2):
                    if not row:
                        continue
                    if len(row) != len(BOUNDARY_COLUMNS):
                        raise DataError(f"{path}:{line_no}: expected {len(BOUNDARY_COLUMNS)} columns, got {len(row)}")
                    try:
                        rows.append([float(cell) for cell in row])
                    except ValueError as e:
                        raise DataError(f"{path}:{line_no}: {e}") from e
        except OSError as e:
            raise DataError(f"could not read {path}: {e}") from e

        if len(rows) < 2:
            raise DataError(f"{path}: a boundary needs at least two rows, got {len(rows)}")
        table = np.array(rows)
        grid = table[:, 0]
        if grid[0] != 0.0:
            raise DataError(f"{path}: the grid must start at t=0, starts at {grid[0]:g}")
        steps = np.diff(grid)
        if np.any(steps <= 0.0) or np.ptp(steps) > GRID_TOLERANCE * max(grid[-1], 1.0):
            raise DataError(f"{path}: the time column is not a uniform increasing grid")
        mean_x1 = mean_at(grid, p)[:, 0] if p is not None else np.full(grid.size, math.nan)
        try:
            boundary = BoundaryEstimate(
                grid=grid,
                values=table[:, 1],
                residuals=table[:, 2],
                theta_counts=table[:, 3],
                mean_x1=mean_x1,
            )
        except ValueError as e:
            raise DataError(f"{path}: {e}") from e
        logger.debug(f"Loaded boundary with {grid.size} knots from {path}")
        return boundary

    @staticmethod
    def save_drift(ds: DriftSchedule, path: PathLike) -> Path:
        """Write the input schedule CSV (t, mu1, mu2)."""
        rows = (
            [format_float(t), format_float(a), format_float(b)]
            for t, a, b in zip(ds.grid, ds.mu1, ds.mu2)
        )
        written = ResultStore._write_rows(path, DRIFT_COLUMNS, rows)
        logger.info(f"Saved drift schedule to {written}")
        return written

    @staticmethod
    def save_report(report: BaseModel, path: PathLike) -> Path:
        """Write a pydantic report as indented JSON."""
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
        except OSError as e:
            logger.error(f"Could not write {path}: {e}")
            raise DataError(f"could not write {path}: {e}") from e
        logger.info(f"Saved {type(report).__name__} to {path}")
        return path
