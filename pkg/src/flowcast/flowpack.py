"""The "flowpack" container: one JSON header line + little-endian float64 payload.

Version 1.  Header fields for fields/ensembles:
``{version, kind, nx, ny, nz, e?, x0, x1, y0, y1, z0, z1}``.
The payload holds, member by member, the (u, v) pair of every grid point in
the fixed flatten order.  Other artifact kinds (latents, basis, measurements,
state) reuse the same header-plus-payload layout with their own fields; their
readers/writers live next to the types they serialize and call into the
low-level helpers here.

Grids are stored as origin + spacing, so only uniformly spaced grids are
serializable.  Round trips are bit exact for finite values.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DimensionError, FlowpackFormatError, NumericError
from .grid import EnsembleForecast, Grid3D, GriddedField

FLOWPACK_VERSION = 1

_KNOWN_KINDS = ("field", "ensemble", "latents", "basis", "measurements", "state")


def write_raw(path, header: dict, arrays) -> None:
    """Write a header dict plus a sequence of float64 arrays."""
    header = dict(header)
    header["version"] = FLOWPACK_VERSION
    blob = json.dumps(header, sort_keys=True).encode("utf-8") + b"\n"
    with open(path, "wb") as fh:
        fh.write(blob)
        for arr in arrays:
            arr = np.ascontiguousarray(arr, dtype="<f8")
            if not np.all(np.isfinite(arr)):
                raise NumericError("flowpack payloads must be finite")
            fh.write(arr.tobytes())


def read_raw(path) -> tuple[dict, np.ndarray]:
    """Read the header and the full float64 payload of a flowpack file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            line = fh.readline()
            payload = fh.read()
    except OSError as exc:
        raise FlowpackFormatError(f"cannot read {path}: {exc}") from exc
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FlowpackFormatError(f"{path}: malformed flowpack header") from exc
    if not isinstance(header, dict):
        raise FlowpackFormatError(f"{path}: flowpack header must be a JSON object")
    if header.get("version") != FLOWPACK_VERSION:
        raise FlowpackFormatError(
            f"{path}: unsupported flowpack version {header.get('version')!r}"
        )
    if header.get("kind") not in _KNOWN_KINDS:
        raise FlowpackFormatError(f"{path}: unknown kind {header.get('kind')!r}")
    if len(payload) % 8 != 0:
        raise FlowpackFormatError(f"{path}: payload is not a whole number of floats")
    data = np.frombuffer(payload, dtype="<f8").astype(float)
    if not np.all(np.isfinite(data)):
        raise FlowpackFormatError(f"{path}: payload contains non-finite values")
    return header, data


def grid_header(grid: Grid3D) -> dict:
    """Axis-extent header fields for a uniformly spaced grid.

    ``spacing()`` is evaluated for every axis so non-uniform grids are
    rejected at write time; endpoints (not spacings) are stored so the
    reconstruction reproduces the original linspace bit for bit.
    """
    for axis in ("x", "y", "z"):
        grid.spacing(axis)
    return {
        "nx": grid.nx,
        "ny": grid.ny,
        "nz": grid.nz,
        "x0": float(grid.x_coords[0]),
        "x1": float(grid.x_coords[-1]),
        "y0": float(grid.y_coords[0]),
        "y1": float(grid.y_coords[-1]),
        "z0": float(grid.z_coords[0]),
        "z1": float(grid.z_coords[-1]),
    }


def grid_from_header(header: dict) -> Grid3D:
    try:
        nx, ny, nz = int(header["nx"]), int(header["ny"]), int(header["nz"])
        x0, x1 = float(header["x0"]), float(header["x1"])
        y0, y1 = float(header["y0"]), float(header["y1"])
        z0, z1 = float(header["z0"]), float(header["z1"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FlowpackFormatError(f"incomplete grid header: {exc}") from exc

    def axis(n, lo, hi):
        return np.array([lo]) if n == 1 else np.linspace(lo, hi, n)

    return Grid3D(
        nx=nx,
        ny=ny,
        nz=nz,
        x_coords=axis(nx, x0, x1),
        y_coords=axis(ny, y0, y1),
        z_coords=axis(nz, z0, z1),
    )


def write_flowpack(path, value) -> None:
    """Serialize a GriddedField or EnsembleForecast."""
    if isinstance(value, GriddedField):
        header = {"kind": "field", **grid_header(value.grid)}
        write_raw(path, header, [value.velocities])
    elif isinstance(value, EnsembleForecast):
        header = {"kind": "ensemble", "e": value.n_members, **grid_header(value.grid)}
        write_raw(path, header, [m.velocities for m in value.members])
    else:
        raise DimensionError(f"cannot serialize object of type {type(value).__name__}")


def read_flowpack(path):
    """Read a field or ensemble flowpack file."""
    header, data = read_raw(path)
    kind = header["kind"]
    if kind not in ("field", "ensemble"):
        raise FlowpackFormatError(
            f"{path}: expected a field or ensemble, found kind {kind!r}"
        )
    grid = grid_from_header(header)
    n = grid.n_points
    if kind == "field":
        if data.size != 2 * n:
            raise FlowpackFormatError(
                f"{path}: header declares {n} points but payload has "
                f"{data.size} scalars"
            )
        return GriddedField(grid=grid, velocities=data.reshape(n, 2))
    e = int(header.get("e", 0))
    if e < 2:
        raise FlowpackFormatError(f"{path}: ensemble header needs e >= 2")
    if data.size != 2 * n * e:
        raise FlowpackFormatError(
            f"{path}: payload size {data.size} != 2 * {n} * {e}"
        )
    members = [
        GriddedField(grid=grid, velocities=data[2 * n * i : 2 * n * (i + 1)].reshape(n, 2))
        for i in range(e)
    ]
    return EnsembleForecast(members=tuple(members))


def field_to_csv(path, value) -> None:
    """Write one row per grid point: x,y,z,u,v[,member]."""
    if isinstance(value, GriddedField):
        pts = value.grid.points()
        rows = np.column_stack([pts, value.velocities])
        header = "x,y,z,u,v"
    elif isinstance(value, EnsembleForecast):
        pts = value.grid.points()
        blocks = [
            np.column_stack([pts, m.velocities, np.full(len(pts), i)])
            for i, m in enumerate(value.members)
        ]
        rows = np.vstack(blocks)
        header = "x,y,z,u,v,member"
    else:
        raise DimensionError(f"cannot export object of type {type(value).__name__}")
    np.savetxt(path, rows, delimiter=",", header=header, comments="", fmt="%.17g")


def field_to_vtk(path, field: GriddedField) -> None:
    """Legacy-ASCII VTK structured grid with a 3-component velocity vector."""
    if not isinstance(field, GriddedField):
        raise DimensionError("VTK export supports gridded fields only")
    g = field.grid
    pts = g.points()
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("flowcast field\nASCII\nDATASET STRUCTURED_GRID\n")
        fh.write(f"DIMENSIONS {g.nx} {g.ny} {g.nz}\n")
        fh.write(f"POINTS {g.n_points} double\n")
        for x, y, z in pts:
            fh.write(f"{x:.17g} {y:.17g} {-z:.17g}\n")
        fh.write(f"POINT_DATA {g.n_points}\n")
        fh.write("VECTORS velocity double\n")
        for u, v in field.velocities:
            fh.write(f"{u:.17g} {v:.17g} 0\n")
