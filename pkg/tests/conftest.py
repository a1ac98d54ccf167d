import numpy as np
import pytest

from orbitcover.geometry import ConvexRegion, DensityField


@pytest.fixture(scope="session")
def room():
    return ConvexRegion.from_vertices([(0, 0), (4, 0), (4, 2.8), (0, 2.8)])


@pytest.fixture(scope="session")
def uniform():
    return DensityField.uniform()


@pytest.fixture(scope="session")
def bump():
    return DensityField.gaussian_bump(center=(0.5, -0.2), width=1.2, floor=0.3)


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
