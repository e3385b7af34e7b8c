import numpy as np

from flowcast.glider import GliderMission, simulate_glider, zero_flow
from flowcast.grid import GriddedField
from flowcast.report import (
    save_field_figure,
    save_spectrum_figure,
    save_trajectory_figure,
)


def _png_ok(path):
    return path.exists() and path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_spectrum_figure(tmp_path):
    path = tmp_path / "spectrum.png"
    save_spectrum_figure(np.geomspace(10.0, 0.01, 40), path)
    assert _png_ok(path)


def test_field_figure(tmp_path, rng, desk_grid):
    field = GriddedField(grid=desk_grid, velocities=rng.normal(size=(desk_grid.n_points, 2)))
    path = tmp_path / "field.png"
    save_field_figure(field, path)
    assert _png_ok(path)


def test_trajectory_figure(tmp_path):
    mission = GliderMission(
        start=(0.0, 0.0, 0.0), target=(100.0, 50.0, 40.0),
        speed=0.3, step_length=10.0, max_path_length=200.0,
    )
    v = mission.speed * np.array([0.6, 0.3, np.sqrt(1 - 0.45)])
    traj = simulate_glider(zero_flow(), v, mission)
    path = tmp_path / "traj.png"
    save_trajectory_figure({"demo": traj}, mission.target, path)
    assert _png_ok(path)
