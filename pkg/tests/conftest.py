import numpy as np
import pytest

from surface_dpp.geometry import make_sphere, make_torus, quadrature_grid


@pytest.fixture(scope="session")
def sphere():
    return make_sphere(1.0)


@pytest.fixture(scope="session")
def torus_i():
    return make_torus(1j, 1.0)


@pytest.fixture(scope="session")
def sphere_grid(sphere):
    return quadrature_grid(sphere, 48)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
