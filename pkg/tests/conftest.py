import numpy as np
import pytest

from nlslab.grids import make_grid
from nlslab.potentials import PotentialSpec, flat_potential


@pytest.fixture(scope="session")
def grid_1d():
    return make_grid(2048, 100.0)


@pytest.fixture(scope="session")
def grid_wide():
    return make_grid(4096, 200.0)


@pytest.fixture(scope="session")
def pot_inc():
    return PotentialSpec("increasing", epsilon=0.05, steepness=1.0)


@pytest.fixture(scope="session")
def pot_dec():
    return PotentialSpec("decreasing", epsilon=0.05, a_minus=1.0, a_plus=0.5,
                         steepness=1.0)


@pytest.fixture(scope="session")
def pot_flat():
    return flat_potential(1.0, epsilon=0.05)


def parity_error(values: np.ndarray, parity: int) -> float:
    """Max deviation from even (+1) or odd (-1) symmetry about the grid center."""
    inner = values[1:]
    return float(np.max(np.abs(inner - parity * inner[::-1])))
