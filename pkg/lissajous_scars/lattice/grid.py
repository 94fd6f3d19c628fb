"""Uniform grid on the periodic box [-Lx, Lx) x [-Ly, Ly)."""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple, TYPE_CHECKING

import numpy as np
from scipy import fft as sp_fft

from ..errors import GridError

if TYPE_CHECKING:
    from ..potential.confinement import PotentialConfig

MIN_POINTS = 8

# Evanescent tail added beyond the 2*E_max turning line, in oscillator lengths
TAIL_OSCILLATOR_LENGTHS = 6.0


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with ``points`` nodes per axis on [-extent, extent).

    Node ``i`` on the x axis sits at ``-extent_x + i * spacing_x``; the last
    node is one spacing short of ``+extent_x`` because the box is periodic.
    Arrays sampled on the grid have shape ``(points_y, points_x)``, row-major,
    so row ``j`` holds the nodes with ``y = y[j]``.
    """

    extent_x: float
    extent_y: float
    points_x: int
    points_y: int

    def __post_init__(self):
        for name in ("points_x", "points_y"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise GridError(f"{name} must be an integer, got {value!r}")
            if value < MIN_POINTS or value % 2:
                raise GridError(f"{name} must be even and >= {MIN_POINTS}, got {value}")
        for name in ("extent_x", "extent_y"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise GridError(f"{name} must be positive and finite, got {value!r}")

    @property
    def spacing_x(self) -> float:
        return 2.0 * self.extent_x / self.points_x

    @property
    def spacing_y(self) -> float:
        return 2.0 * self.extent_y / self.points_y

    @property
    def cell_area(self) -> float:
        return self.spacing_x * self.spacing_y

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.points_y, self.points_x)

    @property
    def size(self) -> int:
        return self.points_x * self.points_y

    @cached_property
    def x(self) -> np.ndarray:
        return -self.extent_x + np.arange(self.points_x) * self.spacing_x

    @cached_property
    def y(self) -> np.ndarray:
        return -self.extent_y + np.arange(self.points_y) * self.spacing_y

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays X, Y of shape ``(points_y, points_x)``."""
        return np.meshgrid(self.x, self.y, indexing="xy")

    def nearest_index(self, x: float, y: float) -> Tuple[int, int]:
        """Row/column index ``(j, i)`` of the node closest to (x, y)."""
        i = int(round((x + self.extent_x) / self.spacing_x))
        j = int(round((y + self.extent_y) / self.spacing_y))
        return (min(max(j, 0), self.points_y - 1), min(max(i, 0), self.points_x - 1))

    def contains(self, x: np.ndarray, y: np.ndarray, margin: float = 0.0) -> bool:
        """True if all points lie inside the box shrunk by ``margin``."""
        return bool(
            np.all(np.abs(x) <= self.extent_x - margin)
            and np.all(np.abs(y) <= self.extent_y - margin)
        )


def make_grid(L: float, n: int) -> GridSpec:
    """Square grid [-L, L)^2 with n x n nodes.

    Args:
        L: Half-width of the box (a.u.)
        n: Nodes per axis, even and at least 8

    Returns:
        Grid specification

    Raises:
        GridError: odd or too small n, nonpositive L
    """
    return GridSpec(extent_x=float(L), extent_y=float(L), points_x=n, points_y=n)


def _fft_friendly_even(n: int) -> int:
    n = max(int(n), MIN_POINTS)
    n = sp_fft.next_fast_len(n)
    while n % 2:
        n = sp_fft.next_fast_len(n + 1)
    return n


def default_grid(cfg: "PotentialConfig", e_max: float) -> GridSpec:
    """Grid that resolves states up to ``e_max`` in the potential of ``cfg``.

    The box reaches the line where the harmonic potential equals 2*e_max plus
    a tail of a few oscillator lengths, so eigenstates have decayed to
    roundoff at the periodic boundary. The spacing resolves a quarter of the
    shortest local wavelength and, when bumps are present, half a bump width.

    Args:
        cfg: Potential configuration (frequencies, bump width)
        e_max: Highest energy of interest (a.u.)

    Returns:
        Grid specification
    """
    if not e_max > 0:
        raise GridError(f"e_max must be positive, got {e_max!r}")

    lambda_min = 2.0 * math.pi / math.sqrt(2.0 * e_max)
    spacing = lambda_min / 4.0
    if cfg.amplitude > 0 and cfg.density > 0:
        spacing = min(spacing, cfg.sigma / 2.0)

    extents = []
    points = []
    for omega in (cfg.omega_x, cfg.omega_y):
        extent = 2.0 * math.sqrt(e_max) / omega + TAIL_OSCILLATOR_LENGTHS / math.sqrt(omega)
        n = _fft_friendly_even(math.ceil(2.0 * extent / spacing))
        extents.append(extent)
        points.append(n)

    return GridSpec(extent_x=extents[0], extent_y=extents[1], points_x=points[0], points_y=points[1])
