"""Shared fixtures: small grids and oscillator configurations."""

import pytest

from lissajous_scars.lattice import GridSpec, make_grid
from lissajous_scars.potential import PotentialConfig


@pytest.fixture
def iso_cfg():
    """Unperturbed isotropic oscillator, omega = 1."""
    return PotentialConfig(p=1, q=1, amplitude=0.0)


@pytest.fixture
def aniso_cfg():
    """Unperturbed (1,2) oscillator."""
    return PotentialConfig(p=1, q=2, amplitude=0.0)


@pytest.fixture
def iso_grid():
    return make_grid(8.0, 64)


@pytest.fixture
def aniso_grid():
    """Resolves the (1,2) levels up to E = 7.5 with spectral accuracy."""
    return GridSpec(extent_x=11.0, extent_y=7.0, points_x=80, points_y=48)


@pytest.fixture
def fine_grid():
    return make_grid(6.0, 240)
