import numpy as np
import pytest

from flowcast.basis import (
    VARIANT_LAYERED,
    VARIANT_NAIVE,
    basis_matrix,
    build_layered,
    build_naive3d,
    eval_basis,
    layered_mode_count,
    load_model,
    naive_mode_count,
    reshape_layers,
    save_model,
    spectrum,
    thin_svd,
    truncate,
    unreshape_layers,
)
from flowcast.errors import ConfigError, DimensionError


def test_reshape_layers_hand_case():
    # one horizontal point (2 scalars per layer), 2 layers, 2 members:
    # member columns split into per-layer columns ordered member-major
    B = np.array(
        [
            [10.0, 20.0],  # layer 0, u
            [11.0, 21.0],  # layer 0, v
            [12.0, 22.0],  # layer 1, u
            [13.0, 23.0],  # layer 1, v
        ]
    )
    A = reshape_layers(B, nx=1, ny=1, nz=2)
    expected = np.array(
        [
            [10.0, 12.0, 20.0, 22.0],
            [11.0, 13.0, 21.0, 23.0],
        ]
    )
    assert np.array_equal(A, expected)


def test_reshape_roundtrip_random(rng):
    for nx, ny, nz, e in [(3, 2, 4, 5), (1, 1, 1, 3), (2, 5, 1, 2), (4, 4, 6, 1)]:
        B = rng.normal(size=(2 * nx * ny * nz, e))
        A = reshape_layers(B, nx, ny, nz)
        assert A.shape == (2 * nx * ny, e * nz)
        assert np.array_equal(unreshape_layers(A, nx, ny, nz), B)


def test_reshape_column_is_member_layer_slice(rng):
    nx, ny, nz, e = 3, 4, 5, 6
    m = 2 * nx * ny
    B = rng.normal(size=(m * nz, e))
    A = reshape_layers(B, nx, ny, nz)
    for i in range(e):
        for z in range(nz):
            assert np.array_equal(A[:, i * nz + z], B[z * m : (z + 1) * m, i])


def test_reshape_shape_validation(rng):
    with pytest.raises(DimensionError):
        reshape_layers(rng.normal(size=(10, 2)), 2, 2, 2)
    with pytest.raises(DimensionError):
        unreshape_layers(rng.normal(size=(8, 3)), 2, 2, 2)


def test_thin_svd_reconstruction_and_sign(rng):
    A = rng.normal(size=(30, 12))
    U, s, V = thin_svd(A)
    assert np.linalg.norm(U @ np.diag(s) @ V.T - A) <= 1e-10 * np.linalg.norm(A)
    assert np.allclose(U.T @ U, np.eye(U.shape[1]), atol=1e-12)
    assert np.allclose(V.T @ V, np.eye(V.shape[1]), atol=1e-12)
    for j in range(U.shape[1]):
        assert U[np.argmax(np.abs(U[:, j])), j] > 0


def test_eckart_young_tail_energy(rng):
    A = rng.normal(size=(25, 10))
    U, s, V = thin_svd(A)
    for r in (1, 3, 7, 10):
        Ur, sr, Vr = truncate(U, s, V, r)
        tail = np.linalg.norm(A - Ur @ np.diag(sr) @ Vr.T) ** 2
        expected = float(np.sum(s[r:] ** 2))
        assert abs(tail - expected) <= 1e-10 * max(np.sum(s**2), 1e-30)


def test_truncate_range_check(rng):
    U, s, V = thin_svd(rng.normal(size=(6, 4)))
    with pytest.raises(ConfigError):
        truncate(U, s, V, 0)
    with pytest.raises(ConfigError):
        truncate(U, s, V, 5)


def test_mode_count_laws():
    assert layered_mode_count(31, 17, 8, 95) == 760
    assert naive_mode_count(31, 17, 8, 95) == 95
    assert layered_mode_count(8, 8, 4, 10) == 40
    assert naive_mode_count(8, 8, 4, 10) == 10
    # layered pooling can only widen the library
    for nx, ny, nz, e in [(5, 5, 3, 7), (2, 2, 10, 4), (31, 17, 8, 95)]:
        assert layered_mode_count(nx, ny, nz, e) >= naive_mode_count(nx, ny, nz, e)


def test_model_shapes(layered_model, naive_model, desk_grid):
    assert layered_model.variant == VARIANT_LAYERED
    assert layered_model.r == 40
    assert layered_model.n_weights == 40 * desk_grid.nz
    assert layered_model.U_tilde.shape == (2 * desk_grid.nx * desk_grid.ny, 40)
    assert layered_model.W.shape == (40, desk_grid.nz * 10)
    assert naive_model.variant == VARIANT_NAIVE
    assert naive_model.r == 10
    assert naive_model.n_weights == 10
    assert naive_model.U_tilde.shape == (2 * desk_grid.n_points, 10)


def test_full_scale_shapes(rng, kern):
    # 31 x 17 x 8 grid with 95 members: pooled matrix is 1054 x 760
    from flowcast.grid import build_grid

    B = rng.normal(size=(2 * 31 * 17 * 8, 95))
    A = reshape_layers(B, 31, 17, 8)
    assert A.shape == (2 * 31 * 17, 8 * 95)
    grid = build_grid((0.0, 3.0e5), (0.0, 1.6e5), (2.5, 685.0), 31, 17, 8)
    model = build_layered(B, grid, kern)
    assert model.U_tilde.shape == (1054, 760)
    assert spectrum(model).mode_count == 760


def test_basis_matrix_interleaves_eval_rows(layered_model, rng):
    queries = rng.uniform([0, 0, 0], [6e4, 6e4, 600.0], size=(4, 3))
    H = basis_matrix(layered_model, queries)
    assert H.shape == (8, layered_model.n_weights)
    for q_idx, q in enumerate(queries):
        assert np.allclose(eval_basis(layered_model, q), H[2 * q_idx : 2 * q_idx + 2])


def test_layered_weights_live_in_depth_blocks(layered_model, desk_grid, rng):
    # a surface query must not touch weight blocks of far-away layers beyond
    # the kernel's vertical reach
    q = np.array([3.0e4, 3.0e4, float(desk_grid.z_coords[0])])
    H = eval_basis(layered_model, q)
    r = layered_model.r
    blocks = H.reshape(2, desk_grid.nz, r)
    surface = np.abs(blocks[:, 0]).max()
    deep = np.abs(blocks[:, -1]).max()
    # layers are ~227 m apart with a 100 m vertical scale: >= 1e-4 falloff
    assert deep <= 1e-4 * surface


def test_truncation_keeps_leading_modes(coeff_matrix, desk_grid, kern, layered_model):
    small = build_layered(coeff_matrix, desk_grid, kern, r=5)
    assert small.r == 5
    assert np.allclose(small.U_tilde, layered_model.U_tilde[:, :5])
    assert np.array_equal(small.singular_values, layered_model.singular_values)


def test_spectrum_energy_is_normalized(layered_model):
    rep = spectrum(layered_model)
    assert rep.mode_count == 40
    assert np.all(np.diff(rep.cumulative_energy) >= -1e-15)
    assert rep.cumulative_energy[-1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(rep.singular_values[:-1] >= rep.singular_values[1:])


def test_save_load_model_roundtrip(tmp_path, layered_model, naive_model):
    for model in (layered_model, naive_model):
        path = tmp_path / f"{model.variant}.flowpack"
        save_model(path, model)
        back = load_model(path)
        assert back.variant == model.variant
        assert back.grid == model.grid
        assert back.kernel == model.kernel
        assert back.r == model.r
        assert np.array_equal(back.U_tilde, model.U_tilde)
        assert np.array_equal(back.singular_values, model.singular_values)
        assert np.array_equal(back.W, model.W)
