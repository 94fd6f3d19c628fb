"""Analytic Hermite-Gaussian solutions and truncated-basis diagonalization."""

from .hermite import (
    HgIndex, hermite_functions, unperturbed_energy, hg_mode, enumerate_modes, resonant_sets,
)
from .truncated import TruncatedSolution, bump_matrix_element, diagonalize_truncated

__all__ = [
    "HgIndex", "hermite_functions", "unperturbed_energy", "hg_mode", "enumerate_modes",
    "resonant_sets", "TruncatedSolution", "bump_matrix_element", "diagonalize_truncated",
]
