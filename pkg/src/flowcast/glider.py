"""Glider trajectory simulation and constant-velocity planning.

The glider travels at a fixed speed relative to the water; the flow only
adds its horizontal components (vertical flow is taken as zero).  Euler
integration uses a fixed relative-travel step: dt = step_length / speed.
Planning searches constant headings on a deterministic coarse-to-fine
direction grid and picks the heading whose simulated path passes closest to
the target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .grid import GriddedField, depth_average
from .sensing import FieldSampler

COARSE_AZIMUTH_STEP = 2.0  # degrees
COARSE_DESCENT_STEP = 1.0  # degrees
REFINEMENT_ROUNDS = 3


@dataclass(frozen=True, eq=False)
class GliderMission:
    """Surface start, underwater target, and stepping parameters."""

    start: np.ndarray  # (3,) m
    target: np.ndarray  # (3,) m
    speed: float = 0.3  # m/s relative to water
    step_length: float = 10.0  # m of relative travel per Euler step
    max_path_length: float = 1.0e4  # m

    def __post_init__(self):
        start = np.asarray(self.start, dtype=float).ravel()
        target = np.asarray(self.target, dtype=float).ravel()
        if start.shape != (3,) or target.shape != (3,):
            raise DimensionError("start and target must be 3-vectors")
        if np.array_equal(start, target):
            raise ConfigError("target must differ from start")
        if self.speed <= 0 or self.step_length <= 0 or self.max_path_length <= 0:
            raise ConfigError("speed, step_length, max_path_length must be > 0")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "target", target)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Euler path with its closest approach to the mission target."""

    points: np.ndarray  # (T, 3)
    closest_approach: float  # m
    closest_index: int
    exited: bool  # left the flow field's valid volume


class UniformFlow:
    """Constant horizontal flow, defined everywhere (for tests and baselines)."""

    def __init__(self, u: float, v: float):
        self.uv = np.array([float(u), float(v)])

    def __call__(self, points, check: bool = True) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.tile(self.uv, (len(pts), 1))

    def inside(self, points) -> np.ndarray:
        return np.ones(len(np.atleast_2d(np.asarray(points))), dtype=bool)


def zero_flow() -> UniformFlow:
    return UniformFlow(0.0, 0.0)


def as_flow(flow):
    """Accept a GriddedField or anything already callable with inside()."""
    if isinstance(flow, GriddedField):
        return FieldSampler(flow)
    return flow


def depth_averaged_flow(field: GriddedField) -> FieldSampler:
    """Depth-independent sampler of the field's vertical mean."""
    return FieldSampler(depth_average(field))


def _batch_simulate(flow, velocities: np.ndarray, mission: GliderMission, record: bool):
    """Euler-integrate many constant relative velocities at once.

    Returns (closest distances, closest indices, exited flags, points),
    where points is the single recorded path when record=True (requires
    exactly one candidate).
    """
    flow = as_flow(flow)
    c = len(velocities)
    dt = mission.step_length / mission.speed
    n_steps = int(math.ceil(mission.max_path_length / mission.step_length - 1e-12))
    pos = np.tile(mission.start, (c, 1))
    active = np.ones(c, dtype=bool)
    exited = np.zeros(c, dtype=bool)
    dist = np.linalg.norm(pos - mission.target, axis=1)
    best = dist.copy()
    best_idx = np.zeros(c, dtype=int)
    path = [mission.start.copy()] if record else None

    for step in range(1, n_steps + 1):
        ok = flow.inside(pos)
        newly_out = active & ~ok
        exited |= newly_out
        active &= ok
        if not np.any(active):
            break
        uv = flow(pos[active], check=False)
        vel3 = velocities[active].copy()
        vel3[:, 0] += uv[:, 0]
        vel3[:, 1] += uv[:, 1]
        pos[active] = pos[active] + dt * vel3
        d = np.linalg.norm(pos[active] - mission.target, axis=1)
        improved = d < best[active]
        idx_active = np.flatnonzero(active)
        upd = idx_active[improved]
        best[upd] = d[improved]
        best_idx[upd] = step
        if record:
            if not active[0]:
                break
            path.append(pos[0].copy())
    points = np.array(path) if record else None
    return best, best_idx, exited, points


def simulate_glider(flow, velocity_rel, mission: GliderMission) -> Trajectory:
    """Euler-integrate one constant relative velocity under the given flow."""
    velocity_rel = np.asarray(velocity_rel, dtype=float).ravel()
    if velocity_rel.shape != (3,):
        raise DimensionError("velocity_rel must be a 3-vector")
    if abs(np.linalg.norm(velocity_rel) - mission.speed) > 1e-9 * mission.speed:
        raise ConfigError("|velocity_rel| must equal the mission speed")
    best, best_idx, exited, points = _batch_simulate(
        flow, velocity_rel[None, :], mission, record=True
    )
    return Trajectory(
        points=points,
        closest_approach=float(best[0]),
        closest_index=int(best_idx[0]),
        exited=bool(exited[0]),
    )


def _heading_velocity(theta_deg: np.ndarray, phi_deg: np.ndarray, speed: float):
    """Velocity vectors from azimuth/descent angles (z positive down)."""
    th = np.radians(theta_deg)
    ph = np.radians(phi_deg)
    return speed * np.column_stack(
        [np.cos(ph) * np.cos(th), np.cos(ph) * np.sin(th), np.sin(ph)]
    )


def plan_velocity(flow_estimate, mission: GliderMission) -> np.ndarray:
    """Constant relative velocity minimising closest approach on the estimate.

    Deterministic coarse grid over azimuth (2 deg) and descent angle
    (1 deg, descent only), then three rounds of step-halving refinement
    around the best heading.  Ties break toward smaller azimuth, then
    smaller descent angle.
    """
    flow_estimate = as_flow(flow_estimate)

    def evaluate(thetas, phis):
        # theta-major, phi-minor candidate order fixes the tie-break rule
        tt = np.repeat(thetas, len(phis))
        pp = np.tile(phis, len(thetas))
        vels = _heading_velocity(tt, pp, mission.speed)
        best, _, _, _ = _batch_simulate(flow_estimate, vels, mission, record=False)
        j = int(np.argmin(best))
        return float(best[j]), float(tt[j]), float(pp[j]), vels[j]

    thetas = np.arange(0.0, 360.0, COARSE_AZIMUTH_STEP)
    phis = np.arange(COARSE_DESCENT_STEP, 90.0 + 1e-9, COARSE_DESCENT_STEP)
    best_d, best_th, best_ph, best_vel = evaluate(thetas, phis)

    dth, dph = COARSE_AZIMUTH_STEP, COARSE_DESCENT_STEP
    for _ in range(REFINEMENT_ROUNDS):
        dth *= 0.5
        dph *= 0.5
        offs = np.arange(-2, 3)
        local_th = np.sort(np.unique((best_th + offs * dth) % 360.0))
        local_ph = np.unique(np.clip(best_ph + offs * dph, 1e-3, 90.0))
        d, th, ph, vel = evaluate(local_th, local_ph)
        if d < best_d:
            best_d, best_th, best_ph, best_vel = d, th, ph, vel
    return best_vel


def evaluate_planning_suite(truth_flow, estimates, mission: GliderMission):
    """Plan on each estimate, simulate on the truth, tabulate closest approach.

    ``estimates`` maps row names to flows (GriddedField or sampler).
    Returns a list of (name, closest_approach_m, velocity, trajectory) in
    input order.
    """
    truth_flow = as_flow(truth_flow)
    rows = []
    for name, est in estimates.items():
        vel = plan_velocity(est, mission)
        traj = simulate_glider(truth_flow, vel, mission)
        rows.append((name, traj.closest_approach, vel, traj))
    return rows


def trajectory_to_csv(path, traj: Trajectory) -> None:
    rows = np.column_stack([np.arange(len(traj.points)), traj.points])
    np.savetxt(
        path, rows, delimiter=",", header="step,x,y,z", comments="", fmt="%.17g"
    )


def trajectory_to_vtk(path, traj: Trajectory) -> None:
    """Legacy-ASCII VTK polyline of the path (z flipped to plot depth down)."""
    pts = traj.points
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("flowcast trajectory\nASCII\nDATASET POLYDATA\n")
        fh.write(f"POINTS {len(pts)} double\n")
        for x, y, z in pts:
            fh.write(f"{x:.17g} {y:.17g} {-z:.17g}\n")
        fh.write(f"LINES 1 {len(pts) + 1}\n")
        fh.write(" ".join([str(len(pts))] + [str(i) for i in range(len(pts))]) + "\n")
