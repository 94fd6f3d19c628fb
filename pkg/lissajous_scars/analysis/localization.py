"""Inverse-participation localization measure normalized by the classical area."""

from typing import Optional, Sequence

import numpy as np

from ..errors import ConfigError
from ..lattice.fields import StateFunction
from ..potential.confinement import PotentialConfig, classical_area


def density_moment(psi: StateFunction) -> float:
    """Discrete integral of |psi|^4."""
    rho = psi.density()
    return float(np.sum(rho * rho) * psi.grid.cell_area)


def alpha_value(psi: StateFunction, energy: Optional[float], cfg: PotentialConfig) -> float:
    """alpha = Z * integral |psi|^4 with Z = 2 pi E / (omega_x omega_y).

    Z is the area of the classically allowed ellipse at E, so a density
    spread evenly over that ellipse gives alpha = 1 and localized states
    give larger values.

    Args:
        psi: Normalized state
        energy: Energy fixing Z; falls back to ``psi.energy``
        cfg: Confinement frequencies
    """
    if energy is None:
        energy = psi.energy
    if energy is None or not energy > 0:
        raise ConfigError(f"alpha needs a positive energy, got {energy!r}")
    return classical_area(energy, cfg) * density_moment(psi)


def alpha_values(states: Sequence[StateFunction], cfg: PotentialConfig) -> np.ndarray:
    return np.array([alpha_value(psi, psi.energy, cfg) for psi in states])
