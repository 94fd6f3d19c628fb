"""Random Gaussian bumps M * sum_i exp(-|r - r_i|^2 / 2 sigma^2)."""

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from ..lattice.fields import ScalarField
from ..lattice.grid import GridSpec
from .confinement import PotentialConfig, harmonic_potential

logger = logging.getLogger("LissajousScars.potential")


@dataclass(frozen=True, eq=False)
class BumpSet:
    """One realization of bump centres with their common amplitude and width."""

    positions: np.ndarray
    amplitude: float
    sigma: float
    seed: int

    def __post_init__(self):
        positions = np.array(self.positions, dtype=np.float64).reshape(-1, 2)
        positions.setflags(write=False)
        object.__setattr__(self, "positions", positions)

    def __len__(self) -> int:
        return self.positions.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, BumpSet):
            return NotImplemented
        return (
            self.amplitude == other.amplitude
            and self.sigma == other.sigma
            and self.seed == other.seed
            and np.array_equal(self.positions, other.positions)
        )

    def shifted(self, dx: float, dy: float) -> "BumpSet":
        return BumpSet(self.positions + np.array([dx, dy]), self.amplitude, self.sigma, self.seed)

    def count_inside(self, cfg: PotentialConfig, energy: float) -> int:
        """Number of bumps inside the classical ellipse of ``cfg`` at ``energy``."""
        x, y = self.positions[:, 0], self.positions[:, 1]
        harmonic = 0.5 * ((cfg.omega_x * x) ** 2 + (cfg.omega_y * y) ** 2)
        return int(np.count_nonzero(harmonic <= energy))

    @classmethod
    def from_csv(cls, path: Path, amplitude: float, sigma: float, seed: int) -> "BumpSet":
        with open(path, 'r', newline='', encoding='utf-8') as f:
            rows = list(csv.DictReader(f))
        positions = [(float(row["x"]), float(row["y"])) for row in rows]
        return cls(np.array(positions, dtype=np.float64).reshape(-1, 2), amplitude, sigma, seed)


def scatter_rectangle(cfg: PotentialConfig) -> Tuple[float, float]:
    """Half-widths of the rectangle bounding the classical ellipse at scatter_energy."""
    half_x = math.sqrt(2.0 * cfg.scatter_energy) / cfg.omega_x
    half_y = math.sqrt(2.0 * cfg.scatter_energy) / cfg.omega_y
    return half_x, half_y


def scatter_bumps(cfg: PotentialConfig) -> BumpSet:
    """Draw bump centres uniformly over the rectangle bounding the scatter ellipse.

    The count is Poisson(density * area) unless ``cfg.fixed_count`` is set.
    The generator is numpy's PCG64 (``default_rng``) seeded with ``cfg.seed``;
    the count is drawn first, then all x, then all y.
    """
    rng = np.random.default_rng(cfg.seed)
    half_x, half_y = scatter_rectangle(cfg)
    expected = cfg.density * 4.0 * half_x * half_y

    if cfg.fixed_count:
        count = int(round(expected))
    else:
        count = int(rng.poisson(expected)) if expected > 0 else 0

    x = rng.uniform(-half_x, half_x, size=count)
    y = rng.uniform(-half_y, half_y, size=count)
    logger.debug(f"Scattered {count} bumps (expected {expected:.1f}) with seed {cfg.seed}")
    return BumpSet(np.column_stack([x, y]), cfg.amplitude, cfg.sigma, cfg.seed)


def evaluate_bumps(grid: GridSpec, bumps: BumpSet) -> ScalarField:
    """Sum of all Gaussians on the grid.

    Each bump factorizes into gx(x) * gy(y), so the whole field is one
    (ny x N) @ (N x nx) product.
    """
    if len(bumps) == 0 or bumps.amplitude == 0.0:
        return ScalarField(grid, np.zeros(grid.shape))

    inv_two_sigma2 = 1.0 / (2.0 * bumps.sigma ** 2)
    gx = np.exp(-(grid.x[None, :] - bumps.positions[:, 0:1]) ** 2 * inv_two_sigma2)
    gy = np.exp(-(grid.y[None, :] - bumps.positions[:, 1:2]) ** 2 * inv_two_sigma2)
    return ScalarField(grid, bumps.amplitude * (gy.T @ gx))


def total_potential(
    grid: GridSpec,
    cfg: PotentialConfig,
    bumps: Optional[BumpSet] = None,
) -> Tuple[ScalarField, BumpSet]:
    """Confinement plus bumps.

    Args:
        grid: Target grid
        cfg: Potential configuration
        bumps: Pre-drawn realization. None draws one from ``cfg``

    Returns:
        Tuple of (total potential, bump realization)
    """
    if bumps is None:
        bumps = scatter_bumps(cfg)
    potential = harmonic_potential(grid, cfg) + evaluate_bumps(grid, bumps)
    return potential, bumps
