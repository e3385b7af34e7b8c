"""Estimation of time-invariant 3D ocean flow fields.

Builds incompressible basis flows from an ensemble forecast via a
layer-pooled SVD, updates their weights online from point current
measurements with a Kalman filter, and ships the simulators (ADCP sensing,
underwater glider) and baselines needed to evaluate the approach on
synthetic ensembles.
"""

from .basis import (
    BasisModel,
    SpectrumReport,
    build_layered,
    build_naive3d,
    eval_basis,
    layered_mode_count,
    naive_mode_count,
    reshape_layers,
    spectrum,
    thin_svd,
    truncate,
)
from .ensemble import (
    LatentMember,
    SynthConfig,
    assemble_B,
    fit_ensemble,
    fit_latent,
    generate_synthetic_ensemble,
    nearest_member,
)
from .estimator import (
    BoundResult,
    EstimatorState,
    batch_update,
    init_kf,
    predict,
    reconstruct,
    span_bound,
    update,
)
from .flowpack import read_flowpack, write_flowpack
from .glider import (
    GliderMission,
    Trajectory,
    evaluate_planning_suite,
    plan_velocity,
    simulate_glider,
)
from .grid import (
    EnsembleForecast,
    Grid3D,
    GriddedField,
    build_grid,
    depth_average,
    downsample_depth,
)
from .kernel import (
    KernelConfig,
    evaluate_latent_field,
    incompressible_kernel,
    kernel_matrix,
    scalar_kernel,
    sigma_from_surface_speed,
)
from .metrics import ErrorReport, error_report, relative_error, rmse
from .sensing import (
    ADCPConfig,
    FieldSampler,
    MeasurementSet,
    adcp_ping,
    generate_campaign,
    grid_point_campaign,
    interpolate_field,
)

__version__ = "0.1.0"
