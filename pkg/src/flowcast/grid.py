"""Regular 3D grids and gridded horizontal-velocity fields.

Coordinates are Cartesian meters; depth (z) is positive down.  Grid points
are flattened with depth (k) slowest, then y (j), then x (i), so each depth
layer occupies a contiguous block of ``2 * nx * ny`` velocity scalars.  The
basis construction relies on this layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, NumericError


def _as_coords(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ConfigError(f"{name} must be a non-empty 1D array")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} must be finite")
    if arr.size > 1 and not np.all(np.diff(arr) > 0):
        raise ConfigError(f"{name} must be strictly increasing")
    return arr


@dataclass(frozen=True, eq=False)
class Grid3D:
    """Regular lattice of nx * ny * nz sample points."""

    nx: int
    ny: int
    nz: int
    x_coords: np.ndarray
    y_coords: np.ndarray
    z_coords: np.ndarray

    def __post_init__(self):
        for n, name in ((self.nx, "nx"), (self.ny, "ny"), (self.nz, "nz")):
            if int(n) < 1:
                raise ConfigError(f"{name} must be >= 1, got {n}")
        object.__setattr__(self, "x_coords", _as_coords(self.x_coords, "x_coords"))
        object.__setattr__(self, "y_coords", _as_coords(self.y_coords, "y_coords"))
        object.__setattr__(self, "z_coords", _as_coords(self.z_coords, "z_coords"))
        if (len(self.x_coords), len(self.y_coords), len(self.z_coords)) != (
            self.nx,
            self.ny,
            self.nz,
        ):
            raise DimensionError("coordinate array lengths must match nx, ny, nz")

    @property
    def n_points(self) -> int:
        return self.nx * self.ny * self.nz

    def flatten_index(self, i: int, j: int, k: int) -> int:
        """Flat index of point (i, j, k); k slowest, then j, then i."""
        if not (0 <= i < self.nx and 0 <= j < self.ny and 0 <= k < self.nz):
            raise DimensionError(f"index ({i}, {j}, {k}) out of range")
        return (k * self.ny + j) * self.nx + i

    def unflatten_index(self, idx: int) -> tuple[int, int, int]:
        if not 0 <= idx < self.n_points:
            raise DimensionError(f"flat index {idx} out of range")
        k, rem = divmod(idx, self.nx * self.ny)
        j, i = divmod(rem, self.nx)
        return i, j, k

    def points(self) -> np.ndarray:
        """All grid points as an (n_points, 3) array in flatten order."""
        zz, yy, xx = np.meshgrid(
            self.z_coords, self.y_coords, self.x_coords, indexing="ij"
        )
        return np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])

    def layer_rows(self, k: int) -> slice:
        """Slice of flat point indices belonging to depth layer k."""
        m = self.nx * self.ny
        return slice(k * m, (k + 1) * m)

    def spacing(self, axis: str) -> float:
        """Uniform spacing along an axis; 0.0 for single-point axes."""
        coords = {"x": self.x_coords, "y": self.y_coords, "z": self.z_coords}[axis]
        if coords.size < 2:
            return 0.0
        d = np.diff(coords)
        if not np.allclose(d, d[0], rtol=1e-9, atol=0.0):
            raise ConfigError(f"{axis} spacing is not uniform")
        return float(d[0])

    def bounds(self) -> tuple[tuple[float, float], ...]:
        return (
            (float(self.x_coords[0]), float(self.x_coords[-1])),
            (float(self.y_coords[0]), float(self.y_coords[-1])),
            (float(self.z_coords[0]), float(self.z_coords[-1])),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid3D):
            return NotImplemented
        return (
            (self.nx, self.ny, self.nz) == (other.nx, other.ny, other.nz)
            and np.array_equal(self.x_coords, other.x_coords)
            and np.array_equal(self.y_coords, other.y_coords)
            and np.array_equal(self.z_coords, other.z_coords)
        )


@dataclass(frozen=True, eq=False)
class GriddedField:
    """Per-grid-point horizontal velocity (u east, v north), in m/s."""

    grid: Grid3D
    velocities: np.ndarray  # (n_points, 2)

    def __post_init__(self):
        vel = np.asarray(self.velocities, dtype=float)
        if vel.shape != (self.grid.n_points, 2):
            raise DimensionError(
                f"velocities shape {vel.shape} != ({self.grid.n_points}, 2)"
            )
        if not np.all(np.isfinite(vel)):
            raise NumericError("velocity components must be finite")
        object.__setattr__(self, "velocities", vel)

    def as_volume(self) -> np.ndarray:
        """Velocities as an (nz, ny, nx, 2) view."""
        g = self.grid
        return self.velocities.reshape(g.nz, g.ny, g.nx, 2)

    def flat(self) -> np.ndarray:
        """Velocities as a length 2*n_points vector (u0, v0, u1, v1, ...)."""
        return self.velocities.ravel()

    def __eq__(self, other) -> bool:
        if not isinstance(other, GriddedField):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(
            self.velocities, other.velocities
        )


@dataclass(frozen=True, eq=False)
class EnsembleForecast:
    """Ordered collection of E >= 2 member fields on a shared grid."""

    members: tuple[GriddedField, ...]

    def __post_init__(self):
        members = tuple(self.members)
        if len(members) < 2:
            raise ConfigError("an ensemble needs at least 2 members")
        grid = members[0].grid
        for m in members[1:]:
            if m.grid != grid:
                raise DimensionError("all ensemble members must share one grid")
        object.__setattr__(self, "members", members)

    @property
    def grid(self) -> Grid3D:
        return self.members[0].grid

    @property
    def n_members(self) -> int:
        return len(self.members)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EnsembleForecast):
            return NotImplemented
        return self.members == other.members


def build_grid(x_extent, y_extent, z_extent, nx: int, ny: int, nz: int) -> Grid3D:
    """Uniformly spaced grid covering the given extents.

    Endpoints are included when a count is >= 2; a count of 1 keeps only
    the lower end of the extent.
    """

    def axis(extent, n, name):
        lo, hi = float(extent[0]), float(extent[1])
        if n < 1:
            raise ConfigError(f"{name} count must be >= 1, got {n}")
        if lo >= hi:
            raise ConfigError(f"{name} extent must be ordered, got ({lo}, {hi})")
        if n == 1:
            return np.array([lo])
        return np.linspace(lo, hi, n)

    return Grid3D(
        nx=nx,
        ny=ny,
        nz=nz,
        x_coords=axis(x_extent, nx, "x"),
        y_coords=axis(y_extent, ny, "y"),
        z_coords=axis(z_extent, nz, "z"),
    )


def downsample_depth(field: GriddedField, factor: int) -> GriddedField:
    """Keep every factor-th depth layer, starting at the shallowest.

    Layers are decimated, not averaged; the new layer count is
    ceil(nz / factor).
    """
    if factor < 1:
        raise ConfigError(f"downsample factor must be >= 1, got {factor}")
    g = field.grid
    kept = np.arange(0, g.nz, factor)
    new_grid = Grid3D(
        nx=g.nx,
        ny=g.ny,
        nz=len(kept),
        x_coords=g.x_coords,
        y_coords=g.y_coords,
        z_coords=g.z_coords[kept],
    )
    vol = field.as_volume()[kept]
    return GriddedField(grid=new_grid, velocities=vol.reshape(-1, 2))


def depth_average(field: GriddedField) -> GriddedField:
    """Arithmetic depth mean of the field, on a single-layer grid.

    The result is meant to be evaluated depth-independently when used as a
    3D flow (the classic depth-averaged baseline).
    """
    g = field.grid
    mean_vel = field.as_volume().mean(axis=0)
    new_grid = Grid3D(
        nx=g.nx,
        ny=g.ny,
        nz=1,
        x_coords=g.x_coords,
        y_coords=g.y_coords,
        z_coords=np.array([float(g.z_coords.mean())]),
    )
    return GriddedField(grid=new_grid, velocities=mean_vel.reshape(-1, 2))
