"""Latent regression of ensemble members, synthetic ensembles, baselines.

Each member field is regressed onto the kernel's coefficient space
(beta such that K(grid, grid) @ beta best fits the member velocities);
the betas are the columns of the B matrix consumed by the basis builders.
A synthetic gyre-field generator stands in for real forecast data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigError, DimensionError, NumericError
from .grid import EnsembleForecast, Grid3D, GriddedField
from .kernel import KernelConfig, kernel_matrix

DEFAULT_RIDGE = 1e-8


@dataclass(frozen=True, eq=False)
class LatentMember:
    """Streamfunction coefficients of one ensemble member."""

    beta: np.ndarray  # length 2 * n_grid_points
    member_index: int
    residual: float  # RMS fit residual at grid points, m/s

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float).ravel()
        if not np.all(np.isfinite(beta)):
            raise NumericError("latent coefficients must be finite")
        object.__setattr__(self, "beta", beta)


@dataclass(frozen=True)
class SynthConfig:
    """Random-gyre ensemble generator settings."""

    seed: int = 0
    n_members: int = 10
    n_gyres: int = 6
    speed_scale: float = 0.25  # m/s
    layer_correlation: float = 0.5
    outlier_member: bool = True

    def __post_init__(self):
        if self.n_members < 2:
            raise ConfigError("n_members must be >= 2")
        if not 0.0 <= self.layer_correlation <= 1.0:
            raise ConfigError("layer_correlation must be in [0, 1]")
        if self.n_gyres < 1 or self.speed_scale <= 0:
            raise ConfigError("n_gyres must be >= 1 and speed_scale > 0")


def estimate_gram_lambda_max(K: np.ndarray, iterations: int = 30) -> float:
    """Largest eigenvalue of a PSD Gram matrix, by power iteration."""
    v = np.ones(K.shape[0]) / math.sqrt(K.shape[0])
    lam = 0.0
    for _ in range(iterations):
        w = K @ v
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    return lam


class GramSolver:
    """Shared Gram factorization for fitting many members on one grid."""

    def __init__(self, data_points: np.ndarray, cfg: KernelConfig, ridge: float):
        if ridge < 0:
            raise ConfigError("ridge must be >= 0")
        self.cfg = cfg
        self.ridge = ridge
        self.K = kernel_matrix(data_points, data_points, cfg)
        self.lambda_max = estimate_gram_lambda_max(self.K)
        self._cho = None
        if ridge > 0 and self.lambda_max > 0:
            regularized = self.K + ridge * self.lambda_max * np.eye(self.K.shape[0])
            try:
                self._cho = scipy.linalg.cho_factor(regularized)
            except np.linalg.LinAlgError as exc:
                raise NumericError(f"Gram factorization failed: {exc}") from exc

    def solve(self, u: np.ndarray) -> np.ndarray:
        if self._cho is not None:
            return scipy.linalg.cho_solve(self._cho, u)
        # ridge = 0: rank-revealing least squares (minimum-norm solution)
        beta, _, _, _ = scipy.linalg.lstsq(self.K, u, lapack_driver="gelsd")
        return beta


def fit_latent(
    member: GriddedField,
    cfg: KernelConfig,
    ridge: float = DEFAULT_RIDGE,
    member_index: int = 0,
    solver: GramSolver | None = None,
) -> LatentMember:
    """Least-squares latent coefficients of one member field.

    With ridge > 0 solves (K + ridge * lambda_max * I) beta = u; with
    ridge = 0 takes the minimum-norm least-squares solution.
    """
    if solver is None:
        solver = GramSolver(member.grid.points(), cfg, ridge)
    elif solver.K.shape[0] != 2 * member.grid.n_points:
        raise DimensionError("member grid does not match the solver's data grid")
    u = member.flat()
    beta = solver.solve(u)
    residual = float(np.sqrt(np.mean((u - solver.K @ beta) ** 2)))
    return LatentMember(beta=beta, member_index=member_index, residual=residual)


def fit_ensemble(
    ensemble: EnsembleForecast, cfg: KernelConfig, ridge: float = DEFAULT_RIDGE
) -> list[LatentMember]:
    """Fit every member, sharing one Gram factorization."""
    solver = GramSolver(ensemble.grid.points(), cfg, ridge)
    return [
        fit_latent(m, cfg, ridge, member_index=i, solver=solver)
        for i, m in enumerate(ensemble.members)
    ]


def assemble_B(latents) -> np.ndarray:
    """Stack latent vectors into the (2 * n_points) x E coefficient matrix."""
    latents = list(latents)
    if not latents:
        raise DimensionError("need at least one latent member")
    indices = sorted(lat.member_index for lat in latents)
    if indices != list(range(len(latents))):
        raise DimensionError(
            f"member indices must be 0..{len(latents) - 1} exactly once, got {indices}"
        )
    length = latents[0].beta.size
    B = np.empty((length, len(latents)))
    for lat in latents:
        if lat.beta.size != length:
            raise DimensionError("latent vectors must all have the same length")
        B[:, lat.member_index] = lat.beta
    return B


def _gyre_layer(grid: Grid3D, rng: np.random.Generator, sc: SynthConfig) -> np.ndarray:
    """One exactly divergence-free horizontal layer of gyre velocities.

    A random sum-of-Gaussians streamfunction is sampled on a ghost-extended
    lattice and differenced with the same central stencil used by the
    divergence checks, so the discrete layer divergence vanishes identically.
    """
    dx, dy = grid.spacing("x"), grid.spacing("y")
    x_ext = np.concatenate(
        [[grid.x_coords[0] - dx], grid.x_coords, [grid.x_coords[-1] + dx]]
    )
    y_ext = np.concatenate(
        [[grid.y_coords[0] - dy], grid.y_coords, [grid.y_coords[-1] + dy]]
    )
    lx = grid.x_coords[-1] - grid.x_coords[0]
    ly = grid.y_coords[-1] - grid.y_coords[0]
    scale = min(lx, ly)

    centers_x = rng.uniform(grid.x_coords[0] - 0.1 * lx, grid.x_coords[-1] + 0.1 * lx, sc.n_gyres)
    centers_y = rng.uniform(grid.y_coords[0] - 0.1 * ly, grid.y_coords[-1] + 0.1 * ly, sc.n_gyres)
    widths = rng.uniform(0.15, 0.35, sc.n_gyres) * scale
    signs = rng.choice([-1.0, 1.0], sc.n_gyres)
    strengths = rng.uniform(0.5, 1.0, sc.n_gyres)

    xx, yy = np.meshgrid(x_ext, y_ext)  # (ny+2, nx+2)
    psi = np.zeros_like(xx)
    for cx, cy, w, s, a in zip(centers_x, centers_y, widths, signs, strengths):
        amp = s * a * sc.speed_scale * w * math.sqrt(math.e)
        psi += amp * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * w**2))

    u = (psi[2:, 1:-1] - psi[:-2, 1:-1]) / (2.0 * dy)
    v = -(psi[1:-1, 2:] - psi[1:-1, :-2]) / (2.0 * dx)
    return np.stack([u, v], axis=-1)  # (ny, nx, 2)


def _synthesize_member(grid: Grid3D, sc: SynthConfig, rng: np.random.Generator) -> GriddedField:
    layers = [_gyre_layer(grid, rng, sc) for _ in range(grid.nz)]
    c = sc.layer_correlation
    blended = [layers[0]]
    for lay in layers[1:]:
        blended.append(c * blended[-1] + (1.0 - c) * lay)
    vol = np.stack(blended, axis=0)  # (nz, ny, nx, 2)
    return GriddedField(grid=grid, velocities=vol.reshape(-1, 2))


def generate_synthetic_ensemble(
    grid: Grid3D, sc: SynthConfig
) -> tuple[EnsembleForecast, GriddedField | None]:
    """Seeded random-gyre ensemble plus an optional held-out truth field.

    Every layer is exactly divergence-free on the grid's central-difference
    stencil.  The truth member uses its own RNG stream and is never part of
    the returned ensemble, mirroring a leave-one-out protocol.
    """
    if grid.nx < 2 or grid.ny < 2:
        raise ConfigError("synthetic generation needs nx >= 2 and ny >= 2")
    members = [
        _synthesize_member(grid, sc, np.random.default_rng((sc.seed, m)))
        for m in range(sc.n_members)
    ]
    truth = None
    if sc.outlier_member:
        truth = _synthesize_member(grid, sc, np.random.default_rng((sc.seed, sc.n_members)))
    return EnsembleForecast(members=tuple(members)), truth


def nearest_member(
    ensemble: EnsembleForecast,
    measurements,
    cfg: KernelConfig,
    ridge: float = DEFAULT_RIDGE,
    latents: list[LatentMember] | None = None,
) -> int:
    """Index of the member whose fitted field best matches the measurements.

    Members are compared through their kernel-fitted latent fields evaluated
    at the measurement positions (sum of squared velocity residuals); ties
    go to the lowest index.
    """
    positions = np.asarray(measurements.positions, dtype=float)
    values = np.asarray(measurements.velocities, dtype=float)
    if len(positions) == 0:
        raise DimensionError("nearest_member needs a non-empty measurement set")
    if latents is None:
        latents = fit_ensemble(ensemble, cfg, ridge)
    K_meas = kernel_matrix(positions, ensemble.grid.points(), cfg)
    costs = []
    for lat in sorted(latents, key=lambda l: l.member_index):
        pred = (K_meas @ lat.beta).reshape(-1, 2)
        costs.append(float(np.sum((values - pred) ** 2)))
    return int(np.argmin(costs))
