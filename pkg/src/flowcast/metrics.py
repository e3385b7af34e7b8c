"""Error metrics between estimated and true fields on shared grid points."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericError
from .grid import GriddedField


@dataclass(frozen=True, eq=False)
class ErrorReport:
    rmse: float  # cm/s
    relative_error: float  # percent
    n_points: int
    per_layer_rmse: np.ndarray  # cm/s, length nz

    def as_dict(self) -> dict:
        return {
            "rmse_cm_s": self.rmse,
            "relative_error_pct": self.relative_error,
            "n_points": self.n_points,
            "per_layer_rmse_cm_s": [float(v) for v in self.per_layer_rmse],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


def _check_grids(estimate: GriddedField, truth: GriddedField) -> None:
    if estimate.grid != truth.grid:
        raise DimensionError("estimate and truth must share one grid")


def rmse(estimate: GriddedField, truth: GriddedField) -> float:
    """RMS of the residual over all grid points and both components, cm/s."""
    _check_grids(estimate, truth)
    diff = estimate.velocities - truth.velocities
    return float(np.sqrt(np.mean(diff**2)) * 100.0)


def relative_error(estimate: GriddedField, truth: GriddedField) -> float:
    """Global residual-norm ratio, percent: 100 * |est - truth| / |truth|."""
    _check_grids(estimate, truth)
    truth_norm = np.linalg.norm(truth.velocities)
    if truth_norm == 0.0:
        raise NumericError("relative error undefined for an all-zero truth")
    return float(
        100.0 * np.linalg.norm(estimate.velocities - truth.velocities) / truth_norm
    )


def error_report(estimate: GriddedField, truth: GriddedField) -> ErrorReport:
    _check_grids(estimate, truth)
    diff = (estimate.as_volume() - truth.as_volume()) ** 2
    per_layer = np.sqrt(diff.reshape(truth.grid.nz, -1).mean(axis=1)) * 100.0
    return ErrorReport(
        rmse=rmse(estimate, truth),
        relative_error=relative_error(estimate, truth),
        n_points=truth.grid.n_points,
        per_layer_rmse=per_layer,
    )
