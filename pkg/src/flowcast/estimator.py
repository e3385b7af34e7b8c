"""Kalman-filter weight estimation and the out-of-span error bound.

The flow is time invariant, so the process model is the identity with no
process noise: predict is a no-op and all information enters through the
correction step.  Covariance updates use the Joseph form, which stays
symmetric positive semidefinite over many thousands of sequential scalar-pair
updates.  Measurements are processed one 2-vector at a time, keeping the
largest matrix inverse at 2x2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import flowpack
from .basis import VARIANT_LAYERED, BasisModel, basis_matrix, eval_basis
from .errors import ConfigError, DimensionError, FlowpackFormatError
from .grid import GriddedField

DEFAULT_R_NOISE_FREE = 0.01**2  # m^2/s^2, per-component variance
DEFAULT_R_NOISY = 0.12**2


@dataclass(frozen=True, eq=False)
class EstimatorState:
    """Weight mean w, covariance P, measurement noise R, update counter k."""

    w: np.ndarray
    P: np.ndarray
    R: np.ndarray  # 2x2
    k: int = 0

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).ravel()
        P = np.asarray(self.P, dtype=float)
        R = np.asarray(self.R, dtype=float)
        if P.shape != (w.size, w.size):
            raise DimensionError(f"P shape {P.shape} != ({w.size}, {w.size})")
        if R.shape != (2, 2):
            raise DimensionError("R must be 2x2")
        if not np.allclose(R, R.T) or np.any(np.linalg.eigvalsh(R) <= 0):
            raise ConfigError("R must be symmetric positive definite")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "R", R)

    @property
    def n_weights(self) -> int:
        return self.w.size


@dataclass(frozen=True, eq=False)
class BoundResult:
    """Best-possible weights for a known truth and the resulting RMS error."""

    w_star: np.ndarray
    rmse: float  # cm/s


def regroup_member_weights(model: BasisModel) -> np.ndarray:
    """Per-member weight columns W' in the eval_basis block layout.

    Layered variant: the Z contiguous columns of W belonging to member i
    stack depth block by depth block into one length r*Z column, so that
    reconstructing from column i reproduces member i's fitted field.
    Naive variant: W is already r x E.
    """
    W = model.W
    if model.variant != VARIANT_LAYERED:
        return W.copy()
    r, nz = model.r, model.grid.nz
    e = W.shape[1] // nz
    # W[:, i*nz + z] -> W'[z*r + s, i]
    return W.reshape(r, e, nz).transpose(2, 0, 1).reshape(nz * r, e)


def init_kf(model: BasisModel, R: np.ndarray | float = DEFAULT_R_NOISE_FREE) -> EstimatorState:
    """Initial state from ensemble statistics of the per-member weights.

    w0 is the row-wise mean of W' and P0 a diagonal of the row-wise
    variances (unbiased, 1/(E-1) normalization).
    """
    Wp = regroup_member_weights(model)
    e = Wp.shape[1]
    if e < 2:
        raise ConfigError("ensemble variance needs at least 2 members")
    if np.isscalar(R):
        R = float(R) * np.eye(2)
    w0 = Wp.mean(axis=1)
    P0 = np.diag(Wp.var(axis=1, ddof=1))
    return EstimatorState(w=w0, P=P0, R=np.asarray(R, dtype=float), k=0)


def predict(state: EstimatorState) -> EstimatorState:
    """Identity process model, no process noise: the state is unchanged."""
    return state


def kf_correct(
    w: np.ndarray, P: np.ndarray, H: np.ndarray, z: np.ndarray, R: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """One Joseph-form correction; O(n^2) via rank-m covariance updates."""
    PHt = P @ H.T  # n x m
    S = H @ PHt + R
    G = np.linalg.solve(S.T, PHt.T).T  # n x m gain
    w_new = w + G @ (z - H @ w)
    M = P - PHt @ G.T  # P (I - GH)^T
    P_new = M - G @ (H @ M) + G @ R @ G.T
    P_new = 0.5 * (P_new + P_new.T)
    return w_new, P_new


def update(state: EstimatorState, model: BasisModel, x, z) -> EstimatorState:
    """Assimilate one horizontal-velocity measurement z at position x."""
    z = np.asarray(z, dtype=float).ravel()
    if z.shape != (2,):
        raise DimensionError("measurement must be a 2-vector")
    H = eval_basis(model, np.asarray(x, dtype=float))
    if H.shape[1] != state.n_weights:
        raise DimensionError(
            f"model has {H.shape[1]} weights but state has {state.n_weights}"
        )
    w_new, P_new = kf_correct(state.w, state.P, H, z, state.R)
    return EstimatorState(w=w_new, P=P_new, R=state.R, k=state.k + 1)


def batch_update(state: EstimatorState, model: BasisModel, measurements) -> EstimatorState:
    """Apply update() once per measurement, in measurement order."""
    positions = np.asarray(measurements.positions, dtype=float)
    values = np.asarray(measurements.velocities, dtype=float)
    if len(positions) == 0:
        return state
    # one kernel evaluation for all positions, then sequential corrections
    H_all = basis_matrix(model, positions)
    w, P = state.w, state.P
    for i in range(len(positions)):
        H = H_all[2 * i : 2 * i + 2]
        w, P = kf_correct(w, P, H, values[i], state.R)
    return EstimatorState(w=w, P=P, R=state.R, k=state.k + len(positions))


def span_bound(model: BasisModel, truth: GriddedField) -> BoundResult:
    """Irreducible RMS error of the best basis weights for a known truth.

    Solves the least-squares problem over all grid points with a
    rank-revealing factorization (minimum-norm on rank deficiency) and
    reports the residual RMS in cm/s.
    """
    if truth.grid != model.grid:
        raise DimensionError("truth must live on the model grid")
    H_all = basis_matrix(model, model.grid.points())
    y = truth.flat()
    w_star, _, _, _ = scipy.linalg.lstsq(H_all, y, lapack_driver="gelsd")
    residual = y - H_all @ w_star
    rmse_cm = float(np.sqrt(np.mean(residual**2)) * 100.0)
    return BoundResult(w_star=w_star, rmse=rmse_cm)


def reconstruct(model: BasisModel, w: np.ndarray, queries=None):
    """Evaluate the weighted basis flow H(x) w.

    With queries=None, evaluates on the model grid and returns a
    GriddedField; otherwise returns an (M, 2) velocity array at the given
    points.
    """
    w = np.asarray(w, dtype=float).ravel()
    if w.size != model.n_weights:
        raise DimensionError(f"w length {w.size} != n_weights {model.n_weights}")
    if queries is None:
        vel = (basis_matrix(model, model.grid.points()) @ w).reshape(-1, 2)
        return GriddedField(grid=model.grid, velocities=vel)
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    return (basis_matrix(model, queries) @ w).reshape(-1, 2)


def save_state(path, state: EstimatorState) -> None:
    header = {"kind": "state", "n_weights": state.n_weights, "k": state.k}
    flowpack.write_raw(path, header, [state.w, state.P, state.R])


def load_state(path) -> EstimatorState:
    header, data = flowpack.read_raw(path)
    if header.get("kind") != "state":
        raise FlowpackFormatError(f"{path}: not an estimator state file")
    try:
        n = int(header["n_weights"])
        k = int(header["k"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FlowpackFormatError(f"{path}: incomplete state header") from exc
    expected = n + n * n + 4
    if data.size != expected:
        raise FlowpackFormatError(f"{path}: payload size {data.size} != {expected}")
    w = data[:n]
    P = data[n : n + n * n].reshape(n, n)
    R = data[n + n * n :].reshape(2, 2)
    return EstimatorState(w=w, P=P, R=R, k=k)
