import numpy as np
import pytest

from flowcast.ensemble import (
    GramSolver,
    SynthConfig,
    assemble_B,
    fit_ensemble,
    fit_latent,
    generate_synthetic_ensemble,
    nearest_member,
)
from flowcast.errors import ConfigError, DimensionError
from flowcast.grid import GriddedField, build_grid
from flowcast.kernel import evaluate_latent_field, kernel_matrix
from flowcast.sensing import MeasurementSet, grid_point_campaign


def small_grid():
    return build_grid((0.0, 2.0e4), (0.0, 2.0e4), (2.5, 200.0), 4, 4, 2)


def test_construct_then_fit_recovers_field(rng, kern):
    # a field that is exactly in the kernel's span must be fit to machine level
    grid = small_grid()
    beta_true = rng.normal(size=2 * grid.n_points) * 1e-4
    vel = evaluate_latent_field(grid.points(), grid.points(), beta_true, kern)
    field = GriddedField(grid=grid, velocities=vel)
    lat = fit_latent(field, kern, ridge=0.0)
    recon = evaluate_latent_field(grid.points(), grid.points(), lat.beta, kern)
    err = np.sqrt(np.mean((recon - vel) ** 2))
    scale = max(np.sqrt(np.mean(vel**2)), 1e-12)
    assert err <= 1e-6 * scale


def test_fit_residual_is_small_on_synthetic_member(kern):
    grid = small_grid()
    ensemble, _ = generate_synthetic_ensemble(grid, SynthConfig(seed=3, n_members=2))
    lat = fit_latent(ensemble.members[0], kern)
    speed = np.sqrt(np.mean(ensemble.members[0].velocities ** 2))
    assert lat.residual <= 1e-3 * max(speed, 1e-9)


def test_ridge_monotonically_increases_residual(kern):
    grid = small_grid()
    ensemble, _ = generate_synthetic_ensemble(grid, SynthConfig(seed=5, n_members=2))
    member = ensemble.members[0]
    residuals = [
        fit_latent(member, kern, ridge=r).residual for r in (0.0, 1e-8, 1e-4, 1e-2)
    ]
    assert all(a <= b + 1e-12 for a, b in zip(residuals, residuals[1:]))


def test_shared_solver_matches_individual_fits(kern):
    grid = small_grid()
    ensemble, _ = generate_synthetic_ensemble(grid, SynthConfig(seed=7, n_members=3))
    latents = fit_ensemble(ensemble, kern)
    solver = GramSolver(grid.points(), kern, 1e-8)
    for i, member in enumerate(ensemble.members):
        solo = fit_latent(member, kern, solver=solver)
        assert np.allclose(latents[i].beta, solo.beta)


def test_generation_is_deterministic(desk_grid):
    sc = SynthConfig(seed=11)
    e1, t1 = generate_synthetic_ensemble(desk_grid, sc)
    e2, t2 = generate_synthetic_ensemble(desk_grid, sc)
    assert e1 == e2
    assert t1 == t2
    e3, _ = generate_synthetic_ensemble(desk_grid, SynthConfig(seed=12))
    assert e3 != e1


def test_members_have_zero_discrete_divergence(desk_grid):
    ensemble, truth = generate_synthetic_ensemble(desk_grid, SynthConfig(seed=2))
    dx = desk_grid.spacing("x")
    dy = desk_grid.spacing("y")
    for field in (*ensemble.members, truth):
        vol = field.as_volume()  # (nz, ny, nx, 2)
        du_dx = (vol[:, 1:-1, 2:, 0] - vol[:, 1:-1, :-2, 0]) / (2 * dx)
        dv_dy = (vol[:, 2:, 1:-1, 1] - vol[:, :-2, 1:-1, 1]) / (2 * dy)
        speed = np.sqrt(np.mean(vol**2))
        assert np.max(np.abs(du_dx + dv_dy)) <= 1e-12 * speed / min(dx, dy)


def test_full_layer_correlation_copies_the_top_layer(desk_grid):
    ensemble, _ = generate_synthetic_ensemble(
        desk_grid, SynthConfig(seed=4, n_members=2, layer_correlation=1.0)
    )
    vol = ensemble.members[0].as_volume()
    for k in range(1, desk_grid.nz):
        assert np.array_equal(vol[k], vol[0])


def test_assemble_B_validates_indices(synth_pair, latents, coeff_matrix):
    ensemble, _ = synth_pair
    assert coeff_matrix.shape == (2 * ensemble.grid.n_points, ensemble.n_members)
    with pytest.raises(DimensionError):
        assemble_B(latents[1:])  # missing member 0
    with pytest.raises(DimensionError):
        assemble_B([])


def test_synth_config_validation():
    with pytest.raises(ConfigError):
        SynthConfig(n_members=1)
    with pytest.raises(ConfigError):
        SynthConfig(layer_correlation=1.5)


def test_nearest_member_recovers_planted_member(synth_pair, kern, latents):
    ensemble, _ = synth_pair
    for target in (0, 4, ensemble.n_members - 1):
        ms = grid_point_campaign(ensemble.members[target])
        assert nearest_member(ensemble, ms, kern, latents=latents) == target


def test_nearest_member_is_order_invariant(synth_pair, kern, latents, rng):
    ensemble, truth = synth_pair
    ms = grid_point_campaign(truth)
    idx = nearest_member(ensemble, ms, kern, latents=latents)
    shuffled = ms.permuted(rng.permutation(len(ms)))
    assert nearest_member(ensemble, shuffled, kern, latents=latents) == idx


def test_nearest_member_tie_breaks_low_index(desk_grid, kern):
    # two identical members: cost ties must resolve to the lower index
    ensemble, _ = generate_synthetic_ensemble(desk_grid, SynthConfig(seed=9, n_members=2))
    twin = GriddedField(
        grid=desk_grid, velocities=ensemble.members[0].velocities.copy()
    )
    from flowcast.grid import EnsembleForecast

    ens2 = EnsembleForecast(members=(ensemble.members[0], twin))
    ms = grid_point_campaign(ensemble.members[0])
    assert nearest_member(ens2, ms, kern) == 0


def test_nearest_member_rejects_empty(synth_pair, kern):
    ensemble, _ = synth_pair
    empty = MeasurementSet(positions=np.zeros((0, 3)), velocities=np.zeros((0, 2)))
    with pytest.raises(DimensionError):
        nearest_member(ensemble, empty, kern)


def test_latent_field_matches_gram_product(synth_pair, kern, latents):
    # evaluating the fitted latents on the grid equals K_grid @ beta
    ensemble, _ = synth_pair
    pts = ensemble.grid.points()
    K = kernel_matrix(pts, pts, kern)
    for lat in latents[:2]:
        direct = (K @ lat.beta).reshape(-1, 2)
        assert np.allclose(
            evaluate_latent_field(pts, pts, lat.beta, kern), direct, atol=1e-10
        )
