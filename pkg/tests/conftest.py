import pytest

from wavesing.data import make_bump_data, suggested_domain_length
from wavesing.fields import Grid
from wavesing.weights import make_weight


def bump_grid(lam: float, points: int = 1024, dimension: int = 1, radius: float = 8.0) -> Grid:
    return Grid(dimension, points, suggested_domain_length(lam, radius, 1.0))


@pytest.fixture
def shifted1():
    return make_weight("power_shifted", 1)


@pytest.fixture
def exponential():
    return make_weight("exponential")


@pytest.fixture
def small_bump():
    grid = bump_grid(8.0, points=256)
    return make_bump_data("poly8", 1.0, 8.0, grid)
