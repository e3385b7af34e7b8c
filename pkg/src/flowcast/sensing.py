"""Continuous field interpolation, ADCP ping simulation, measurement campaigns.

Interpolation is separable Catmull-Rom per axis (exact at grid nodes,
reproduces trilinear polynomials), falling back to linear within one cell of
each boundary where the 4-point stencil does not fit.  Axes with a single
point are evaluated coordinate-independently, which is what makes a
depth-averaged field usable as a depth-independent 3D flow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import flowpack
from .errors import ConfigError, DimensionError, FlowpackFormatError
from .grid import GriddedField


@dataclass(frozen=True)
class ADCPConfig:
    """Vertical bin layout and per-component noise of a simulated profiler."""

    bin_spacing: float = 32.0  # m
    n_bins: int = 22
    first_bin_depth: float = 2.5  # m
    noise_std: float = 0.09  # m/s

    def __post_init__(self):
        if self.bin_spacing <= 0 or self.n_bins < 1 or self.noise_std < 0:
            raise ConfigError("bad ADCP config")


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Ordered point measurements: 3D positions with 2D velocities."""

    positions: np.ndarray  # (M, 3)
    velocities: np.ndarray  # (M, 2)

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        vel = np.atleast_2d(np.asarray(self.velocities, dtype=float))
        if pos.size == 0:
            pos = pos.reshape(0, 3)
            vel = vel.reshape(0, 2)
        if pos.shape[1] != 3 or vel.shape != (pos.shape[0], 2):
            raise DimensionError(
                f"positions {pos.shape} / velocities {vel.shape} mismatch"
            )
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocities", vel)

    def __len__(self) -> int:
        return len(self.positions)

    def __iter__(self):
        return zip(self.positions, self.velocities)

    def permuted(self, order) -> "MeasurementSet":
        order = np.asarray(order, dtype=int)
        return MeasurementSet(self.positions[order], self.velocities[order])


def _axis_stencil(coords: np.ndarray, q: np.ndarray):
    """Per-query 4-point stencil (indices, weights) along one axis.

    Interior cells use Catmull-Rom weights, boundary cells linear ones.
    Single-point axes return a unit weight on index 0 regardless of q.
    """
    n = coords.size
    m = q.size
    if n == 1:
        return np.zeros((m, 4), dtype=int), np.tile([1.0, 0.0, 0.0, 0.0], (m, 1))
    i = np.clip(np.searchsorted(coords, q, side="right") - 1, 0, n - 2)
    t = (q - coords[i]) / (coords[i + 1] - coords[i])
    idx = np.clip(i[:, None] + np.arange(-1, 3)[None, :], 0, n - 1)
    w = np.empty((m, 4))
    t2, t3 = t * t, t * t * t
    w[:, 0] = -0.5 * t + t2 - 0.5 * t3
    w[:, 1] = 1.0 - 2.5 * t2 + 1.5 * t3
    w[:, 2] = 0.5 * t + 2.0 * t2 - 1.5 * t3
    w[:, 3] = -0.5 * t2 + 0.5 * t3
    linear = (i < 1) | (i > n - 3)
    if np.any(linear):
        tl = t[linear]
        w[linear] = 0.0
        w[linear, 1] = 1.0 - tl
        w[linear, 2] = tl
    return idx, w


class FieldSampler:
    """Vectorized continuous sampler of a gridded field.

    Callable on an (M, 3) array of positions (or a single 3-vector),
    returning horizontal velocities.  Queries must lie inside the grid's
    bounding box along every multi-point axis.
    """

    def __init__(self, field: GriddedField):
        self.field = field
        self.grid = field.grid
        self._vol = field.as_volume()  # (nz, ny, nx, 2)

    def inside(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ok = np.ones(len(pts), dtype=bool)
        for axis, coords in enumerate(
            (self.grid.x_coords, self.grid.y_coords, self.grid.z_coords)
        ):
            if coords.size < 2:
                continue
            span = coords[-1] - coords[0]
            eps = 1e-9 * span
            ok &= (pts[:, axis] >= coords[0] - eps) & (pts[:, axis] <= coords[-1] + eps)
        return ok

    def __call__(self, points, check: bool = True) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if pts.shape[1] != 3:
            raise DimensionError(f"expected 3-vectors, got shape {pts.shape}")
        if check and not np.all(self.inside(pts)):
            raise DimensionError("query point outside the grid bounding box")
        ix, wx = _axis_stencil(self.grid.x_coords, pts[:, 0])
        iy, wy = _axis_stencil(self.grid.y_coords, pts[:, 1])
        iz, wz = _axis_stencil(self.grid.z_coords, pts[:, 2])
        # gather the local 4x4x4 block per query, then contract axis by axis
        block = self._vol[
            iz[:, :, None, None], iy[:, None, :, None], ix[:, None, None, :]
        ]  # (M, 4, 4, 4, 2)
        t1 = np.einsum("ma,mabcd->mbcd", wz, block)
        t2 = np.einsum("mb,mbcd->mcd", wy, t1)
        vel = np.einsum("mc,mcd->md", wx, t2)
        return vel[0] if single else vel


def interpolate_field(field: GriddedField, x) -> np.ndarray:
    """Cubic (Catmull-Rom) interpolation of the field at one or many points."""
    return FieldSampler(field)(x)


def adcp_ping(
    truth: GriddedField, surface_xy, cfg: ADCPConfig, rng_seed
) -> MeasurementSet:
    """Simulate one vertical profiler ping below a surface position.

    Bin depths start at ``first_bin_depth`` and step by ``bin_spacing``;
    bins falling outside the grid's depth range are dropped.  Each retained
    bin measures the interpolated truth plus independent Gaussian noise per
    component.  Deterministic given the seed.
    """
    g = truth.grid
    sx, sy = float(surface_xy[0]), float(surface_xy[1])
    (x0, x1), (y0, y1), (z0, z1) = g.bounds()
    if not (x0 <= sx <= x1 and y0 <= sy <= y1):
        raise DimensionError("ADCP column outside the grid footprint")
    depths = cfg.first_bin_depth + cfg.bin_spacing * np.arange(cfg.n_bins)
    if g.nz > 1:
        depths = depths[(depths >= z0) & (depths <= z1)]
    positions = np.column_stack(
        [np.full(depths.size, sx), np.full(depths.size, sy), depths]
    )
    values = interpolate_field(truth, positions)
    if cfg.noise_std > 0:
        rng = np.random.default_rng(rng_seed)
        values = values + rng.normal(0.0, cfg.noise_std, values.shape)
    return MeasurementSet(positions=positions, velocities=values)


def generate_campaign(
    truth: GriddedField, n_sites: int, cfg: ADCPConfig, rng_seed
) -> MeasurementSet:
    """Pings at uniformly random surface sites; site-major, depth-major order.

    Per-site noise streams are derived from (seed, site index), so the
    result does not depend on evaluation order.
    """
    if n_sites < 1:
        raise ConfigError("n_sites must be >= 1")
    g = truth.grid
    (x0, x1), (y0, y1), _ = g.bounds()
    rng = np.random.default_rng(rng_seed)
    sites = rng.uniform([x0, y0], [x1, y1], size=(n_sites, 2))
    pings = [
        adcp_ping(truth, sites[i], cfg, (_seed_scalar(rng_seed), i))
        for i in range(n_sites)
    ]
    return MeasurementSet(
        positions=np.vstack([p.positions for p in pings]),
        velocities=np.vstack([p.velocities for p in pings]),
    )


def _seed_scalar(rng_seed) -> int:
    if isinstance(rng_seed, (tuple, list)):
        return int(rng_seed[0])
    return int(rng_seed)


def grid_point_campaign(truth: GriddedField) -> MeasurementSet:
    """One exact, noise-free measurement per grid point, in flatten order."""
    return MeasurementSet(
        positions=truth.grid.points(), velocities=truth.velocities.copy()
    )


def save_measurements(path, ms: MeasurementSet) -> None:
    header = {"kind": "measurements", "n": len(ms)}
    flowpack.write_raw(path, header, [np.column_stack([ms.positions, ms.velocities])])


def load_measurements(path) -> MeasurementSet:
    header, data = flowpack.read_raw(path)
    if header.get("kind") != "measurements":
        raise FlowpackFormatError(f"{path}: not a measurements file")
    n = int(header.get("n", -1))
    if n < 0 or data.size != 5 * n:
        raise FlowpackFormatError(f"{path}: payload size {data.size} != 5 * {n}")
    rows = data.reshape(n, 5)
    return MeasurementSet(positions=rows[:, :3], velocities=rows[:, 3:])


def measurements_to_csv(path, ms: MeasurementSet) -> None:
    rows = np.column_stack([ms.positions, ms.velocities])
    np.savetxt(
        path, rows, delimiter=",", header="x,y,z,u,v", comments="", fmt="%.17g"
    )
