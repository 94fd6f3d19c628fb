"""Uniform periodic-box discretization: grids, fields, states and the spectral kinetic operator."""

from .grid import GridSpec, make_grid, default_grid
from .fields import ScalarField, StateFunction, inner_product
from .spectral import kinetic_apply, kinetic_symbol, kinetic_propagator

__all__ = [
    "GridSpec", "make_grid", "default_grid",
    "ScalarField", "StateFunction", "inner_product",
    "kinetic_apply", "kinetic_symbol", "kinetic_propagator",
]
