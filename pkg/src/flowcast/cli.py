"""Command-line pipeline orchestration.

Every subcommand is deterministic given its config (seeds included); the
same inputs always regenerate byte-identical delimited outputs.

Exit codes: 0 success, 2 IO / malformed flowpack, 3 config or schema
violation, 4 dimension mismatch, 5 numeric failure.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import jsonschema
import numpy as np

from . import basis as basis_mod
from . import ensemble as ens_mod
from . import estimator as est_mod
from . import flowpack
from . import glider as glider_mod
from . import metrics as metrics_mod
from . import report as report_mod
from . import sensing as sensing_mod
from .errors import EXIT_CONFIG, EXIT_IO, ConfigError, FlowcastError
from .grid import build_grid, depth_average
from .kernel import KernelConfig

RUN_CONFIG_SCHEMA = {
    "type": "object",
    "required": ["seed", "grid", "kernel", "synth"],
    "properties": {
        "seed": {"type": "integer"},
        "grid": {
            "type": "object",
            "required": ["x_extent", "y_extent", "z_extent", "nx", "ny", "nz"],
            "properties": {
                "x_extent": {"type": "array", "minItems": 2, "maxItems": 2},
                "y_extent": {"type": "array", "minItems": 2, "maxItems": 2},
                "z_extent": {"type": "array", "minItems": 2, "maxItems": 2},
                "nx": {"type": "integer", "minimum": 1},
                "ny": {"type": "integer", "minimum": 1},
                "nz": {"type": "integer", "minimum": 1},
            },
        },
        "kernel": {
            "type": "object",
            "required": ["ell_x", "ell_y", "ell_z", "sigma_k"],
            "properties": {
                "ell_x": {"type": "number", "exclusiveMinimum": 0},
                "ell_y": {"type": "number", "exclusiveMinimum": 0},
                "ell_z": {"type": "number", "exclusiveMinimum": 0},
                "sigma_k": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "synth": {
            "type": "object",
            "required": ["n_members"],
            "properties": {
                "n_members": {"type": "integer", "minimum": 2},
                "n_gyres": {"type": "integer", "minimum": 1},
                "speed_scale": {"type": "number", "exclusiveMinimum": 0},
                "layer_correlation": {"type": "number", "minimum": 0, "maximum": 1},
                "outlier_member": {"type": "boolean"},
            },
        },
        "ridge": {"type": "number", "minimum": 0},
    },
}

MISSION_SCHEMA = {
    "type": "object",
    "required": ["start", "target"],
    "properties": {
        "start": {"type": "array", "minItems": 3, "maxItems": 3},
        "target": {"type": "array", "minItems": 3, "maxItems": 3},
        "speed": {"type": "number", "exclusiveMinimum": 0},
        "step_length": {"type": "number", "exclusiveMinimum": 0},
        "max_path_length": {"type": "number", "exclusiveMinimum": 0},
    },
}


def _load_json(path, schema, what: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        click.echo(f"error: cannot read {what} {path}: {exc}", err=True)
        sys.exit(EXIT_IO)
    except json.JSONDecodeError as exc:
        click.echo(f"error: {what} {path} is not valid JSON: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        click.echo(f"error: {what} {path} fails validation: {exc.message}", err=True)
        sys.exit(EXIT_CONFIG)
    return doc


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FlowcastError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(exc.exit_code)
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_IO)

    return wrapper


def _run_config_pieces(cfg: dict):
    g = cfg["grid"]
    grid = build_grid(
        g["x_extent"], g["y_extent"], g["z_extent"], g["nx"], g["ny"], g["nz"]
    )
    kernel = KernelConfig.from_dict(cfg["kernel"])
    synth = ens_mod.SynthConfig(
        seed=cfg["seed"],
        n_members=cfg["synth"]["n_members"],
        n_gyres=cfg["synth"].get("n_gyres", 6),
        speed_scale=cfg["synth"].get("speed_scale", 0.25),
        layer_correlation=cfg["synth"].get("layer_correlation", 0.5),
        outlier_member=cfg["synth"].get("outlier_member", True),
    )
    return grid, kernel, synth


@click.group(
    epilog=(
        "Exit codes: 0 success, 2 IO or malformed flowpack, 3 config/schema "
        "violation, 4 dimension mismatch, 5 numeric failure."
    )
)
@click.version_option()
def main():
    """3D ocean flow field estimation toolkit."""


@main.command("gen-ensemble")
@click.argument("config", type=click.Path(exists=True))
@click.option("--out", "out_dir", type=click.Path(), required=True, help="Output directory.")
@_handle_errors
def gen_ensemble(config, out_dir):
    """Generate a synthetic ensemble and held-out truth from a run config."""
    cfg = _load_json(config, RUN_CONFIG_SCHEMA, "run config")
    grid, _, synth = _run_config_pieces(cfg)
    ensemble, truth = ens_mod.generate_synthetic_ensemble(grid, synth)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    flowpack.write_flowpack(out / "ensemble.flowpack", ensemble)
    click.echo(f"wrote {out / 'ensemble.flowpack'} ({ensemble.n_members} members)")
    if truth is not None:
        flowpack.write_flowpack(out / "truth.flowpack", truth)
        click.echo(f"wrote {out / 'truth.flowpack'}")


@main.command("fit-latents")
@click.argument("ensemble_path", type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), required=True,
              help="Run config supplying the kernel parameters.")
@click.option("--ridge", type=float, default=None, help="Relative ridge (default from config or 1e-8).")
@click.option("--out", "out_path", type=click.Path(), required=True)
@_handle_errors
def fit_latents(ensemble_path, config_path, ridge, out_path):
    """Regress every ensemble member into kernel coefficient space."""
    cfg = _load_json(config_path, RUN_CONFIG_SCHEMA, "run config")
    kernel = KernelConfig.from_dict(cfg["kernel"])
    if ridge is None:
        ridge = cfg.get("ridge", ens_mod.DEFAULT_RIDGE)
    value = flowpack.read_flowpack(ensemble_path)
    if not hasattr(value, "members"):
        raise ConfigError(f"{ensemble_path} is not an ensemble")
    latents = ens_mod.fit_ensemble(value, kernel, ridge)
    B = ens_mod.assemble_B(latents)
    header = {
        "kind": "latents",
        "e": len(latents),
        "kernel": kernel.as_dict(),
        "ridge": ridge,
        **flowpack.grid_header(value.grid),
    }
    flowpack.write_raw(out_path, header, [B])
    for lat in latents:
        click.echo(
            f"member {lat.member_index}: fit residual {lat.residual * 100:.4f} cm/s"
        )
    click.echo(f"wrote {out_path} (B is {B.shape[0]}x{B.shape[1]})")


def _load_latents(path):
    header, data = flowpack.read_raw(path)
    if header.get("kind") != "latents":
        raise ConfigError(f"{path} is not a latents file")
    grid = flowpack.grid_from_header(header)
    kernel = KernelConfig.from_dict(header["kernel"])
    e = int(header["e"])
    rows = 2 * grid.n_points
    if data.size != rows * e:
        raise ConfigError(f"{path}: payload size {data.size} != {rows}*{e}")
    return grid, kernel, data.reshape(rows, e)


@main.command("build-basis")
@click.argument("latents_path", type=click.Path(exists=True))
@click.option("--variant", type=click.Choice(["layered", "naive3d"]), default="layered")
@click.option("--rank", type=int, default=None, help="Retained rank (default: full).")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--spectrum-csv", type=click.Path(), default=None)
@click.option("--figure", type=click.Path(), default=None, help="Spectrum figure (PNG).")
@_handle_errors
def build_basis(latents_path, variant, rank, out_path, spectrum_csv, figure):
    """Build a truncated basis model from cached latents."""
    grid, kernel, B = _load_latents(latents_path)
    builder = basis_mod.build_layered if variant == "layered" else basis_mod.build_naive3d
    model = builder(B, grid, kernel, rank)
    basis_mod.save_model(out_path, model)
    rep = basis_mod.spectrum(model)
    kept = rep.cumulative_energy[model.r - 1] if rep.mode_count else 0.0
    click.echo(
        f"{model.variant}: {rep.mode_count} modes, kept r={model.r} "
        f"({kept * 100:.2f}% energy), n_weights={model.n_weights}"
    )
    click.echo(
        "top singular values: "
        + ", ".join(f"{v:.4g}" for v in rep.singular_values[:5])
    )
    if spectrum_csv:
        rows = np.column_stack(
            [np.arange(1, rep.mode_count + 1), rep.singular_values, rep.cumulative_energy]
        )
        np.savetxt(
            spectrum_csv, rows, delimiter=",",
            header="mode,singular_value,cumulative_energy", comments="", fmt="%.17g",
        )
    if figure:
        report_mod.save_spectrum_figure(rep.singular_values, figure)
    click.echo(f"wrote {out_path}")


@main.command("simulate-measurements")
@click.argument("truth_path", type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["gridpoints", "campaign"]), required=True)
@click.option("--sites", type=int, default=450, help="Campaign surface sites.")
@click.option("--seed", type=int, default=0)
@click.option("--noise-std", type=float, default=0.09, help="m/s (campaign mode)")
@click.option("--bin-spacing", type=float, default=32.0)
@click.option("--n-bins", type=int, default=22)
@click.option("--first-bin-depth", type=float, default=2.5)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@_handle_errors
def simulate_measurements(truth_path, mode, sites, seed, noise_std, bin_spacing,
                          n_bins, first_bin_depth, out_path, csv_path):
    """Simulate grid-point or ADCP-campaign measurements of a truth field."""
    truth = flowpack.read_flowpack(truth_path)
    if hasattr(truth, "members"):
        raise ConfigError(f"{truth_path} is an ensemble, expected a field")
    if mode == "gridpoints":
        ms = sensing_mod.grid_point_campaign(truth)
    else:
        cfg = sensing_mod.ADCPConfig(
            bin_spacing=bin_spacing,
            n_bins=n_bins,
            first_bin_depth=first_bin_depth,
            noise_std=noise_std,
        )
        ms = sensing_mod.generate_campaign(truth, sites, cfg, seed)
    sensing_mod.save_measurements(out_path, ms)
    if csv_path:
        sensing_mod.measurements_to_csv(csv_path, ms)
    click.echo(f"wrote {out_path} ({len(ms)} measurements)")


@main.command("estimate")
@click.argument("model_path", type=click.Path(exists=True))
@click.argument("measurements_path", type=click.Path(exists=True))
@click.option("--R", "r_value", type=float, default=0.12,
              help="Measurement noise std per component, m/s.")
@click.option("--out", "state_path", type=click.Path(), required=True)
@click.option("--field-out", "field_path", type=click.Path(), default=None)
@click.option("--truth", "truth_path", type=click.Path(exists=True), default=None)
@click.option("--report-json", type=click.Path(), default=None)
@click.option("--figure", type=click.Path(), default=None, help="Reconstruction quiver (PNG).")
@_handle_errors
def estimate(model_path, measurements_path, r_value, state_path, field_path,
             truth_path, report_json, figure):
    """Run the Kalman filter over a measurement set and write the estimate."""
    model = basis_mod.load_model(model_path)
    ms = sensing_mod.load_measurements(measurements_path)
    state = est_mod.init_kf(model, R=r_value**2)
    state = est_mod.batch_update(state, model, ms)
    est_mod.save_state(state_path, state)
    recon = est_mod.reconstruct(model, state.w)
    if field_path:
        flowpack.write_flowpack(field_path, recon)
    if figure:
        report_mod.save_field_figure(recon, figure)
    click.echo(f"wrote {state_path} after {state.k} updates")
    if truth_path:
        truth = flowpack.read_flowpack(truth_path)
        rep = metrics_mod.error_report(recon, truth)
        click.echo(rep.to_json())
        if report_json:
            Path(report_json).write_text(rep.to_json() + "\n")


@main.command("bound")
@click.argument("model_path", type=click.Path(exists=True))
@click.argument("truth_path", type=click.Path(exists=True))
@_handle_errors
def bound(model_path, truth_path):
    """Out-of-span lower bound of a model for a known truth."""
    model = basis_mod.load_model(model_path)
    truth = flowpack.read_flowpack(truth_path)
    result = est_mod.span_bound(model, truth)
    click.echo(json.dumps(
        {"variant": model.variant, "r": model.r, "n_weights": model.n_weights,
         "rmse_of_bound_cm_s": result.rmse},
        sort_keys=True,
    ))


@main.command("nearest-member")
@click.argument("ensemble_path", type=click.Path(exists=True))
@click.argument("measurements_path", type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write the selected member as a field flowpack.")
@_handle_errors
def nearest_member_cmd(ensemble_path, measurements_path, config_path, out_path):
    """Pick the ensemble member closest to the measurements (baseline)."""
    cfg = _load_json(config_path, RUN_CONFIG_SCHEMA, "run config")
    kernel = KernelConfig.from_dict(cfg["kernel"])
    ensemble = flowpack.read_flowpack(ensemble_path)
    ms = sensing_mod.load_measurements(measurements_path)
    idx = ens_mod.nearest_member(ensemble, ms, kernel, cfg.get("ridge", ens_mod.DEFAULT_RIDGE))
    click.echo(f"nearest member: {idx}")
    if out_path:
        flowpack.write_flowpack(out_path, ensemble.members[idx])
        click.echo(f"wrote {out_path}")


@main.command("glider")
@click.argument("truth_path", type=click.Path(exists=True))
@click.option("--mission", "mission_path", type=click.Path(exists=True), required=True)
@click.option("--estimate", "estimates", multiple=True, metavar="NAME=FIELD.flowpack",
              help="Named estimate field to plan on (repeatable).")
@click.option("--include-truth/--no-include-truth", default=True)
@click.option("--include-depth-averaged/--no-include-depth-averaged", default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--figure", type=click.Path(), default=None, help="Trajectory figure (PNG).")
@_handle_errors
def glider_cmd(truth_path, mission_path, estimates, include_truth,
               include_depth_averaged, out_dir, figure):
    """Plan on each estimate, simulate on the truth, tabulate closest approach."""
    truth = flowpack.read_flowpack(truth_path)
    doc = _load_json(mission_path, MISSION_SCHEMA, "mission")
    mission = glider_mod.GliderMission(
        start=doc["start"],
        target=doc["target"],
        speed=doc.get("speed", 0.3),
        step_length=doc.get("step_length", 10.0),
        max_path_length=doc.get("max_path_length", 1.0e4),
    )
    flows = {}
    if include_truth:
        flows["truth"] = truth
    if include_depth_averaged:
        flows["depth-averaged-truth"] = depth_average(truth)
    for entry in estimates:
        if "=" not in entry:
            raise ConfigError(f"--estimate must be NAME=PATH, got {entry!r}")
        name, path = entry.split("=", 1)
        field = flowpack.read_flowpack(path)
        if hasattr(field, "members"):
            raise ConfigError(f"{path} is an ensemble, expected a field")
        flows[name] = field
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = glider_mod.evaluate_planning_suite(truth, flows, mission)
    trajectories = {}
    lines = ["method,closest_approach_m"]
    click.echo(f"{'method':<24} closest approach (m)")
    for name, dist, _, traj in rows:
        click.echo(f"{name:<24} {dist:.1f}")
        lines.append(f"{name},{dist:.17g}")
        safe = name.replace("/", "_").replace(" ", "_")
        glider_mod.trajectory_to_csv(out / f"trajectory_{safe}.csv", traj)
        glider_mod.trajectory_to_vtk(out / f"trajectory_{safe}.vtk", traj)
        trajectories[name] = traj
    (out / "closest_approaches.csv").write_text("\n".join(lines) + "\n")
    if figure:
        report_mod.save_trajectory_figure(trajectories, mission.target, figure)


@main.command("export")
@click.argument("artifact", type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["csv", "vtk"]), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@_handle_errors
def export(artifact, fmt, out_path):
    """Convert a flowpack artifact to CSV or VTK for plotting."""
    header, _ = flowpack.read_raw(artifact)
    kind = header.get("kind")
    if kind in ("field", "ensemble"):
        value = flowpack.read_flowpack(artifact)
        if fmt == "csv":
            flowpack.field_to_csv(out_path, value)
        else:
            if hasattr(value, "members"):
                raise ConfigError("VTK export supports single fields only")
            flowpack.field_to_vtk(out_path, value)
    elif kind == "measurements":
        if fmt != "csv":
            raise ConfigError("measurements export supports CSV only")
        sensing_mod.measurements_to_csv(out_path, sensing_mod.load_measurements(artifact))
    elif kind == "basis":
        if fmt != "csv":
            raise ConfigError("basis export supports CSV (spectrum) only")
        model = basis_mod.load_model(artifact)
        rep = basis_mod.spectrum(model)
        rows = np.column_stack(
            [np.arange(1, rep.mode_count + 1), rep.singular_values, rep.cumulative_energy]
        )
        np.savetxt(out_path, rows, delimiter=",",
                   header="mode,singular_value,cumulative_energy", comments="", fmt="%.17g")
    else:
        raise ConfigError(f"export does not support kind {kind!r}")
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
