"""Shared fixtures: velocity grids and operator tables built once per session."""

import numpy as np
import pytest

from kinetic_slab.collision import KernelTable, VelocityGrid


@pytest.fixture(scope="session")
def grid8():
    return VelocityGrid.midpoint(n_per_axis=8, v_max=6.0)


@pytest.fixture(scope="session")
def grid12():
    return VelocityGrid.midpoint(n_per_axis=12, v_max=6.0)


@pytest.fixture(scope="session")
def grid16():
    return VelocityGrid.midpoint(n_per_axis=16, v_max=6.0)


@pytest.fixture(scope="session")
def table8(grid8):
    return KernelTable.build(grid8)


@pytest.fixture(scope="session")
def table12(grid12):
    return KernelTable.build(grid12)


@pytest.fixture(scope="session")
def table16(grid16):
    return KernelTable.build(grid16)


@pytest.fixture(scope="session")
def gamma8(grid8):
    from kinetic_slab.gamma import GammaTable

    return GammaTable.build(grid8)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260823)
