"""Harmonic confinement and random Gaussian bumps."""

from .confinement import PotentialConfig, harmonic_potential, classical_area, FWHM_PER_SIGMA
from .bumps import BumpSet, scatter_bumps, evaluate_bumps, total_potential

__all__ = [
    "PotentialConfig", "harmonic_potential", "classical_area", "FWHM_PER_SIGMA",
    "BumpSet", "scatter_bumps", "evaluate_bumps", "total_potential",
]
