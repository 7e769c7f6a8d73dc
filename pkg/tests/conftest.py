import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hoslab.harness import make_rng
from hoslab.spectral import Field, GridSpec

settings.register_profile(
    "hoslab",
    max_examples=30,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("hoslab")


def random_field(grid: GridSpec, seed: int = 0, scale: float = 1.0) -> Field:
    rng = make_rng(seed)
    vals = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return Field(grid, scale * vals)


def gaussian_field(grid: GridSpec, width: float = 1.0, amp: float = 1.0) -> Field:
    r2 = sum(c**2 for c in grid.coordinates())
    return Field(grid, amp * np.exp(-r2 / (2 * width**2)))


@pytest.fixture
def grid1d():
    return GridSpec(d=1, k=3, n=256, L=16.0)


@pytest.fixture
def grid2d():
    return GridSpec(d=2, k=2, n=64, L=8.0)
