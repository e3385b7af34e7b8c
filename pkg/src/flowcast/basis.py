"""Basis models: the layer-pooled (2.5D) SVD pipeline and the naive-3D baseline.

The layered variant slices every latent vector into depth-layer blocks,
pools all slices as columns of one wide matrix A, and takes its thin SVD.
The left singular vectors form a shared 2D mode library; each depth layer
gets its own weight block over that library, so the mode count is
S = min(Z*E, 2*X*Y) instead of the naive min(E, 2*X*Y*Z).  The implied
block-diagonal stacking of the mode library across depths is never
materialized; evaluation exploits the block structure directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import flowpack
from .errors import ConfigError, DimensionError, FlowpackFormatError
from .grid import Grid3D
from .kernel import KernelConfig, kernel_matrix

VARIANT_LAYERED = "layered25d"
VARIANT_NAIVE = "naive3d"


@dataclass(frozen=True, eq=False)
class BasisModel:
    """Truncated basis of incompressible flow modes.

    ``U_tilde`` holds orthonormal mode coefficients (2XY x r for the layered
    variant, 2XYZ x r for naive 3D), ``singular_values`` the full
    pre-truncation spectrum, and ``W`` the truncated sigma * V^T block needed
    to initialize the weight estimator.
    """

    variant: str
    grid: Grid3D
    kernel: KernelConfig
    U_tilde: np.ndarray
    singular_values: np.ndarray
    r: int
    W: np.ndarray  # r x (Z*E) layered, r x E naive

    def __post_init__(self):
        if self.variant not in (VARIANT_LAYERED, VARIANT_NAIVE):
            raise ConfigError(f"unknown basis variant {self.variant!r}")
        sv = np.asarray(self.singular_values, dtype=float)
        if np.any(np.diff(sv) > 1e-12 * max(sv[0] if sv.size else 0.0, 1e-300)):
            raise ConfigError("singular values must be non-increasing")
        if not 1 <= self.r <= sv.size:
            raise ConfigError(f"rank {self.r} out of range 1..{sv.size}")
        rows = 2 * self.grid.nx * self.grid.ny
        if self.variant == VARIANT_NAIVE:
            rows *= self.grid.nz
        if self.U_tilde.shape != (rows, self.r):
            raise DimensionError(
                f"U_tilde shape {self.U_tilde.shape} != ({rows}, {self.r})"
            )
        if self.W.shape[0] != self.r:
            raise DimensionError("W must have r rows")
        object.__setattr__(self, "singular_values", sv)

    @property
    def nz(self) -> int:
        return self.grid.nz

    @property
    def n_weights(self) -> int:
        if self.variant == VARIANT_LAYERED:
            return self.r * self.grid.nz
        return self.r

    @property
    def n_members(self) -> int:
        cols = self.W.shape[1]
        return cols // self.grid.nz if self.variant == VARIANT_LAYERED else cols


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    """Singular values with cumulative squared-energy fractions."""

    singular_values: np.ndarray
    cumulative_energy: np.ndarray
    mode_count: int


def reshape_layers(B: np.ndarray, nx: int, ny: int, nz: int) -> np.ndarray:
    """Regroup member columns into layer-slice columns: (2XYZ, E) -> (2XY, Z*E).

    Column i*Z + z of the result is the depth-z slice of member i, relying
    on the grid flatten order keeping each layer contiguous.
    """
    m = 2 * nx * ny
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != m * nz:
        raise DimensionError(f"B must have {m * nz} rows, got shape {B.shape}")
    e = B.shape[1]
    return B.reshape(nz, m, e).transpose(1, 2, 0).reshape(m, e * nz)


def unreshape_layers(A: np.ndarray, nx: int, ny: int, nz: int) -> np.ndarray:
    """Inverse of :func:`reshape_layers`."""
    m = 2 * nx * ny
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != m or A.shape[1] % nz != 0:
        raise DimensionError(f"A shape {A.shape} incompatible with ({m}, k*{nz})")
    e = A.shape[1] // nz
    return A.reshape(m, e, nz).transpose(2, 0, 1).reshape(m * nz, e)


def thin_svd(A: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD with a deterministic sign convention.

    Returns (U, s, V) with A = U diag(s) V^T.  The largest-magnitude entry
    of every U column is made positive so builds are reproducible across
    linear-algebra backends.
    """
    A = np.asarray(A, dtype=float)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    for j in range(U.shape[1]):
        i = int(np.argmax(np.abs(U[:, j])))
        if U[i, j] < 0:
            U[:, j] = -U[:, j]
            Vt[j, :] = -Vt[j, :]
    return U, s, Vt.T


def truncate(U: np.ndarray, s: np.ndarray, V: np.ndarray, r: int):
    """Keep the first r modes of an SVD triple."""
    if not 1 <= r <= s.size:
        raise ConfigError(f"rank {r} out of range 1..{s.size}")
    return U[:, :r], s[:r], V[:, :r]


def build_layered(
    B: np.ndarray, grid: Grid3D, kernel: KernelConfig, r: int | None = None
) -> BasisModel:
    """Layer-pooled 2.5D basis: reshape -> thin SVD -> truncate."""
    A = reshape_layers(B, grid.nx, grid.ny, grid.nz)
    U, s, V = thin_svd(A)
    if r is None:
        r = s.size
    U_r, s_r, V_r = truncate(U, s, V, r)
    W = s_r[:, None] * V_r.T  # r x (Z*E)
    return BasisModel(
        variant=VARIANT_LAYERED,
        grid=grid,
        kernel=kernel,
        U_tilde=U_r,
        singular_values=s,
        r=r,
        W=W,
    )


def build_naive3d(
    B: np.ndarray, grid: Grid3D, kernel: KernelConfig, r: int | None = None
) -> BasisModel:
    """Whole-member 3D basis: thin SVD of B directly."""
    B = np.asarray(B, dtype=float)
    if B.shape[0] != 2 * grid.n_points:
        raise DimensionError(f"B must have {2 * grid.n_points} rows")
    U, s, V = thin_svd(B)
    if r is None:
        r = s.size
    U_r, s_r, V_r = truncate(U, s, V, r)
    W = s_r[:, None] * V_r.T  # r x E
    return BasisModel(
        variant=VARIANT_NAIVE,
        grid=grid,
        kernel=kernel,
        U_tilde=U_r,
        singular_values=s,
        r=r,
        W=W,
    )


def basis_matrix(model: BasisModel, queries) -> np.ndarray:
    """Stacked mode velocities at the query points: shape (2Q, n_weights).

    For the layered variant, weight block z multiplies the kernel columns of
    depth layer z only (the implicit block-diagonal structure); for naive 3D
    all kernel columns act on one weight block.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    K = kernel_matrix(queries, model.grid.points(), model.kernel)
    if model.variant == VARIANT_NAIVE:
        return K @ model.U_tilde
    m = 2 * model.grid.nx * model.grid.ny
    nz = model.grid.nz
    # (2Q, nz, m) @ (m, r) -> (2Q, nz, r), then depth blocks side by side
    blocks = K.reshape(K.shape[0], nz, m) @ model.U_tilde
    return blocks.reshape(K.shape[0], nz * model.r)


def eval_basis(model: BasisModel, x) -> np.ndarray:
    """Mode matrix H(x) of shape (2, n_weights) at one point."""
    x = np.asarray(x, dtype=float)
    if x.shape != (3,):
        raise DimensionError(f"expected a single 3-vector, got shape {x.shape}")
    return basis_matrix(model, x[None, :])


def spectrum(model: BasisModel) -> SpectrumReport:
    """Full singular-value spectrum and cumulative energy fractions."""
    s = model.singular_values
    energy = s**2
    total = energy.sum()
    cumulative = np.cumsum(energy) / total if total > 0 else np.zeros_like(energy)
    return SpectrumReport(
        singular_values=s.copy(), cumulative_energy=cumulative, mode_count=s.size
    )


def layered_mode_count(nx: int, ny: int, nz: int, e: int) -> int:
    """Thin-SVD mode count of the layered variant: min(Z*E, 2*X*Y)."""
    return min(nz * e, 2 * nx * ny)


def naive_mode_count(nx: int, ny: int, nz: int, e: int) -> int:
    """Thin-SVD mode count of the naive 3D variant: min(E, 2*X*Y*Z)."""
    return min(e, 2 * nx * ny * nz)


def save_model(path, model: BasisModel) -> None:
    header = {
        "kind": "basis",
        "variant": model.variant,
        "r": model.r,
        "n_singular_values": int(model.singular_values.size),
        "w_cols": int(model.W.shape[1]),
        "kernel": model.kernel.as_dict(),
        **flowpack.grid_header(model.grid),
    }
    flowpack.write_raw(
        path, header, [model.U_tilde, model.singular_values, model.W]
    )


def load_model(path) -> BasisModel:
    header, data = flowpack.read_raw(path)
    if header.get("kind") != "basis":
        raise FlowpackFormatError(f"{path}: not a basis model file")
    grid = flowpack.grid_from_header(header)
    kernel = KernelConfig.from_dict(header.get("kernel", {}))
    try:
        variant = header["variant"]
        r = int(header["r"])
        n_sv = int(header["n_singular_values"])
        w_cols = int(header["w_cols"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FlowpackFormatError(f"{path}: incomplete basis header") from exc
    rows = 2 * grid.nx * grid.ny
    if variant == VARIANT_NAIVE:
        rows *= grid.nz
    expected = rows * r + n_sv + r * w_cols
    if data.size != expected:
        raise FlowpackFormatError(
            f"{path}: payload size {data.size} != expected {expected}"
        )
    U = data[: rows * r].reshape(rows, r)
    s = data[rows * r : rows * r + n_sv]
    W = data[rows * r + n_sv :].reshape(r, w_cols)
    return BasisModel(
        variant=variant,
        grid=grid,
        kernel=kernel,
        U_tilde=U,
        singular_values=s,
        r=r,
        W=W,
    )
