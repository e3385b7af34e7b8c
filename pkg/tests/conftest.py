"""Shared fixtures: a desk-scale grid, kernel, and prebuilt basis models.

The heavier artifacts (fitted latents, basis models) are session-scoped so
the unit tests can share one build.
"""

import numpy as np
import pytest

from flowcast.basis import build_layered, build_naive3d
from flowcast.ensemble import SynthConfig, assemble_B, fit_ensemble, generate_synthetic_ensemble
from flowcast.grid import build_grid
from flowcast.kernel import KernelConfig


@pytest.fixture(scope="session")
def desk_grid():
    return build_grid((0.0, 6.0e4), (0.0, 6.0e4), (2.5, 685.0), 8, 8, 4)


@pytest.fixture(scope="session")
def kern():
    return KernelConfig()


@pytest.fixture(scope="session")
def synth_pair(desk_grid):
    ensemble, truth = generate_synthetic_ensemble(desk_grid, SynthConfig(seed=0))
    assert truth is not None
    return ensemble, truth


@pytest.fixture(scope="session")
def latents(synth_pair, kern):
    ensemble, _ = synth_pair
    return fit_ensemble(ensemble, kern)


@pytest.fixture(scope="session")
def coeff_matrix(latents):
    return assemble_B(latents)


@pytest.fixture(scope="session")
def layered_model(coeff_matrix, desk_grid, kern):
    return build_layered(coeff_matrix, desk_grid, kern)


@pytest.fixture(scope="session")
def naive_model(coeff_matrix, desk_grid, kern):
    return build_naive3d(coeff_matrix, desk_grid, kern)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
