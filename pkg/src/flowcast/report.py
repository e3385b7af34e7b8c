"""Matplotlib figure rendering for the CLI's report outputs.

Figures are written to files next to the delimited outputs; nothing here is
interactive.  Rendering is deterministic (fixed figure sizes, no timestamps
in metadata).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .glider import Trajectory
from .grid import GriddedField

_SAVEFIG = {"dpi": 120, "bbox_inches": "tight", "metadata": {"Software": "flowcast"}}


def save_spectrum_figure(singular_values, path) -> None:
    """Log-scale plot of the mode spectrum."""
    s = np.asarray(singular_values, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy(np.arange(1, s.size + 1), np.maximum(s, 1e-300), ".-", ms=3)
    ax.set_xlabel("mode")
    ax.set_ylabel("singular value")
    ax.grid(True, which="both", alpha=0.3)
    fig.savefig(path, **_SAVEFIG)
    plt.close(fig)


def save_field_figure(field: GriddedField, path, max_layers: int = 4) -> None:
    """Quiver plots of up to max_layers depth layers."""
    g = field.grid
    vol = field.as_volume()
    layers = np.linspace(0, g.nz - 1, min(g.nz, max_layers)).astype(int)
    layers = np.unique(layers)
    fig, axes = plt.subplots(
        1, len(layers), figsize=(4 * len(layers), 3.8), squeeze=False
    )
    xx, yy = np.meshgrid(g.x_coords, g.y_coords)
    for ax, k in zip(axes[0], layers):
        ax.quiver(xx, yy, vol[k, :, :, 0], vol[k, :, :, 1])
        ax.set_title(f"z = {g.z_coords[k]:.1f} m")
        ax.set_aspect("equal")
        ax.set_xlabel("x (m)")
    axes[0][0].set_ylabel("y (m)")
    fig.savefig(path, **_SAVEFIG)
    plt.close(fig)


def save_trajectory_figure(trajectories: dict[str, Trajectory], target, path) -> None:
    """Top view and depth profile of one or more glider paths."""
    target = np.asarray(target, dtype=float)
    fig, (ax_top, ax_depth) = plt.subplots(1, 2, figsize=(10, 4))
    for name, traj in trajectories.items():
        pts = traj.points
        ax_top.plot(pts[:, 0], pts[:, 1], label=name)
        ax_depth.plot(
            np.linalg.norm(pts[:, :2] - pts[0, :2], axis=1), pts[:, 2], label=name
        )
    ax_top.plot([target[0]], [target[1]], "ko", ms=6, label="target")
    ax_top.set_xlabel("x (m)")
    ax_top.set_ylabel("y (m)")
    ax_top.set_aspect("equal")
    ax_top.legend(fontsize=7)
    ax_depth.axhline(target[2], color="k", ls=":", lw=0.8)
    ax_depth.invert_yaxis()
    ax_depth.set_xlabel("horizontal distance (m)")
    ax_depth.set_ylabel("depth (m)")
    fig.savefig(path, **_SAVEFIG)
    plt.close(fig)
