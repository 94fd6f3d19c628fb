"""Real-valued fields and complex state functions sampled on a GridSpec."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import GridError, GridMismatchError
from .grid import GridSpec


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real values, one per grid node, shape ``grid.shape``."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            raise GridError(f"field shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise GridError("field contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        if other.grid != self.grid:
            raise GridMismatchError("cannot add fields on different grids")
        return ScalarField(self.grid, self.values + other.values)

    def at(self, x: float, y: float) -> float:
        """Value at the node nearest to (x, y)."""
        j, i = self.grid.nearest_index(x, y)
        return float(self.values[j, i])


@dataclass(frozen=True, eq=False)
class StateFunction:
    """Complex amplitudes on a grid, optionally tagged with an energy."""

    grid: GridSpec
    amplitudes: np.ndarray
    energy: Optional[float] = field(default=None)

    def __post_init__(self):
        amplitudes = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if amplitudes.shape != self.grid.shape:
            raise GridError(f"state shape {amplitudes.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "amplitudes", amplitudes)

    def density(self) -> np.ndarray:
        """Probability density |psi|^2 per node."""
        return self.amplitudes.real ** 2 + self.amplitudes.imag ** 2

    def norm(self) -> float:
        """Discrete L2 norm sqrt(sum |psi|^2 hx hy)."""
        return float(np.sqrt(np.sum(self.density()) * self.grid.cell_area))

    def normalized(self) -> "StateFunction":
        norm = self.norm()
        if norm == 0.0 or not np.isfinite(norm):
            raise GridError("cannot normalize a zero or non-finite state")
        return StateFunction(self.grid, self.amplitudes / norm, self.energy)

    def with_energy(self, energy: Optional[float]) -> "StateFunction":
        return StateFunction(self.grid, self.amplitudes, energy)

    def boundary_ratio(self) -> float:
        """max |psi| on the outermost ring of nodes divided by max |psi| overall."""
        magnitude = np.abs(self.amplitudes)
        peak = magnitude.max()
        if peak == 0.0:
            return 0.0
        ring = max(
            magnitude[0, :].max(), magnitude[-1, :].max(),
            magnitude[:, 0].max(), magnitude[:, -1].max(),
        )
        return float(ring / peak)


def inner_product(a: StateFunction, b: StateFunction) -> complex:
    """Discrete <a|b> = sum conj(a_i) b_i hx hy.

    Raises:
        GridMismatchError: the states live on different grids
    """
    if a.grid != b.grid:
        raise GridMismatchError("inner product of states on different grids")
    return complex(np.vdot(a.amplitudes, b.amplitudes) * a.grid.cell_area)
