"""Shared fixtures: session-scoped bases at the levels the suite needs."""

import numpy as np
import pytest

from sgnls import spectral
from sgnls.geometry import enumerate_vertices


@pytest.fixture(scope="session")
def vs4():
    return enumerate_vertices(4)


@pytest.fixture(scope="session")
def vs6():
    return enumerate_vertices(6)


@pytest.fixture(scope="session")
def vs7():
    return enumerate_vertices(7)


@pytest.fixture(scope="session")
def basis_d3():
    return spectral.build_basis(3, spectral.DIRICHLET)


@pytest.fixture(scope="session")
def basis_d4():
    return spectral.build_basis(4, spectral.DIRICHLET)


@pytest.fixture(scope="session")
def basis_d5():
    return spectral.build_basis(5, spectral.DIRICHLET)


@pytest.fixture(scope="session")
def basis_d6(vs6):
    return spectral.build_basis(6, spectral.DIRICHLET, vs=vs6)


@pytest.fixture(scope="session")
def basis_n6(vs6):
    return spectral.build_basis(6, spectral.NEUMANN, vs=vs6)


@pytest.fixture(scope="session")
def basis_d7(vs7):
    return spectral.build_basis(7, spectral.DIRICHLET, vs=vs7)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
