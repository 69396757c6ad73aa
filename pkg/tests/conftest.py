"""Shared fixtures: parameter families and small reference realizations."""

import numpy as np
import pytest

import vesselpde as v


@pytest.fixture(scope="session")
def sl_params():
    return v.preset_params("SL")


@pytest.fixture(scope="session")
def nls_params():
    return v.preset_params("NLS")


@pytest.fixture(scope="session")
def cansys_params():
    return v.preset_params("CanSys")


@pytest.fixture(scope="session")
def soliton(sl_params):
    """Single decay-rate discrete-spectrum realization: q = -2 sech^2 profile."""
    R = v.realization_from_discrete_spectrum(sl_params, [1j], [[1.0, 1.0j]])
    G = v.build_generators(sl_params, R.A, order=1)
    return R, G


@pytest.fixture(scope="session")
def three_soliton(sl_params):
    """Seeded random pole-free 3-dimensional SL realization."""
    R = v.random_soliton_realization(sl_params, n=3, seed=0)
    G = v.build_generators(sl_params, R.A, order=1)
    return R, G


@pytest.fixture(scope="session")
def nls_random(nls_params):
    """Random NLS realization under the basic flow (the one the cubic
    equation holds for; sigma2 selects the dispersion, not the flow order)."""
    R = v.random_realization(3, 2, nls_params, seed=1)
    G = v.build_generators(nls_params, R.A, order=1)
    return R, G


@pytest.fixture(scope="session")
def cansys_drift(cansys_params):
    """Resonant n=1 canonical-system model: A = i k^2, real row, free diagonal."""
    R = v.realization_from_discrete_spectrum(cansys_params, [0.4], [[1.0, 0.5]], [12.0])
    G = v.build_generators(cansys_params, R.A, order=1)
    return R, G
