"""Perturbed Hamiltonian in a truncated Hermite-Gaussian basis.

Used as an independent referee for the grid solver at small scale.
"""

import csv
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np
from scipy import linalg as sp_linalg
from scipy.special import roots_hermite

from ..errors import BasisTooLargeError, QuadratureOverflowError
from ..lattice.fields import StateFunction
from ..lattice.grid import GridSpec
from ..potential.bumps import BumpSet
from ..potential.confinement import PotentialConfig
from .hermite import HgIndex, enumerate_modes, hermite_functions, oscillator_functions, unperturbed_energy

logger = logging.getLogger("LissajousScars.oracle")

MAX_BASIS_SIZE = 4000


@lru_cache(maxsize=32)
def _log_gauss_hermite(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes u_k and log(w_k) + u_k^2 for the physicists' Gauss-Hermite rule."""
    nodes, weights = roots_hermite(order)
    if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
        raise QuadratureOverflowError(f"Gauss-Hermite weights underflow at order {order}")
    return nodes, np.log(weights) + nodes ** 2


def gaussian_overlap_matrix(n_max: int, center: float, sigma: float, omega: float) -> np.ndarray:
    """1-D matrix <n| exp(-(x - x0)^2 / 2 sigma^2) |n'> for n, n' <= n_max.

    In scaled units xi = sqrt(omega) x the integrand is
    phi_n phi_n' exp(-(xi - xi0)^2 / 2 s^2) with s^2 = omega sigma^2, which
    equals a Gaussian centred at mu times a polynomial of degree n + n'.
    Gauss-Hermite quadrature with n_max + 1 nodes about mu is therefore exact.
    Weights are combined in log space so high orders do not overflow.

    Raises:
        QuadratureOverflowError: the orders are beyond what double precision represents
    """
    xi0 = math.sqrt(omega) * center
    s2 = omega * sigma ** 2
    beta = 1.0 + 1.0 / (2.0 * s2)
    mu = xi0 / (2.0 * s2 * beta)

    nodes, log_weights = _log_gauss_hermite(n_max + 1)
    xi = mu + nodes / math.sqrt(beta)
    log_factor = log_weights - (xi - xi0) ** 2 / (2.0 * s2)
    phi = hermite_functions(n_max, xi)
    weighted = phi * np.exp(log_factor)[np.newaxis, :]
    matrix = (weighted @ phi.T) / math.sqrt(beta)
    if not np.all(np.isfinite(matrix)):
        raise QuadratureOverflowError(f"non-finite overlap for orders up to {n_max}")
    return 0.5 * (matrix + matrix.T)


def bump_matrix_element(
    a: HgIndex,
    b: HgIndex,
    position: Tuple[float, float],
    sigma: float,
    amplitude: float,
    cfg: PotentialConfig,
) -> float:
    """<Psi_a| M exp(-|r - r0|^2 / 2 sigma^2) |Psi_b> by separable quadrature."""
    if amplitude == 0.0:
        return 0.0
    x_factor = gaussian_overlap_matrix(max(a.n, b.n), position[0], sigma, cfg.omega_x)[a.n, b.n]
    y_factor = gaussian_overlap_matrix(max(a.m, b.m), position[1], sigma, cfg.omega_y)[a.m, b.m]
    return float(amplitude * x_factor * y_factor)


@dataclass(frozen=True, eq=False)
class TruncatedSolution:
    """Eigenpairs of the truncated Hamiltonian.

    ``coefficients[:, j]`` expands eigenstate j over ``basis``.
    """

    basis: List[HgIndex]
    energies: np.ndarray
    coefficients: np.ndarray
    potential: PotentialConfig

    def synthesize(self, grid: GridSpec, index: int) -> StateFunction:
        """Sample eigenstate ``index`` on a grid (renormalized discretely)."""
        n_max = max(idx.n for idx in self.basis)
        m_max = max(idx.m for idx in self.basis)
        fx = oscillator_functions(n_max, grid.x, self.potential.omega_x)
        fy = oscillator_functions(m_max, grid.y, self.potential.omega_y)
        amplitudes = np.zeros(grid.shape)
        for coefficient, idx in zip(self.coefficients[:, index], self.basis):
            amplitudes += coefficient * np.outer(fy[idx.m], fx[idx.n])
        return StateFunction(grid, amplitudes, float(self.energies[index])).normalized()

    def to_csv(self, path: Path, n_states: int = None) -> Path:
        """Write rows (state index, n, m, coefficient)."""
        path = Path(path)
        n_states = len(self.energies) if n_states is None else min(n_states, len(self.energies))
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            writer.writerow(["state", "n", "m", "coefficient"])
            for state in range(n_states):
                for row, idx in enumerate(self.basis):
                    writer.writerow([state, idx.n, idx.m, repr(float(self.coefficients[row, state]))])
        return path


def diagonalize_truncated(e_cut: float, bumps: BumpSet, cfg: PotentialConfig) -> TruncatedSolution:
    """Diagonalize H in the basis of modes with unperturbed energy <= e_cut.

    H_ab = delta_ab E_a + sum over bumps of the separable bump elements.

    Raises:
        BasisTooLargeError: more than MAX_BASIS_SIZE modes below the cutoff
    """
    basis = enumerate_modes(e_cut, cfg)
    size = len(basis)
    if size == 0:
        raise BasisTooLargeError(f"no modes below e_cut={e_cut}")
    if size > MAX_BASIS_SIZE:
        raise BasisTooLargeError(f"{size} modes below e_cut={e_cut} exceed the limit of {MAX_BASIS_SIZE}")

    n_index = np.array([idx.n for idx in basis])
    m_index = np.array([idx.m for idx in basis])
    hamiltonian = np.diag([unperturbed_energy(idx, cfg) for idx in basis])

    if len(bumps) and bumps.amplitude != 0.0:
        n_max, m_max = int(n_index.max()), int(m_index.max())
        perturbation = np.zeros((size, size))
        for x0, y0 in bumps.positions:
            ox = gaussian_overlap_matrix(n_max, x0, bumps.sigma, cfg.omega_x)
            oy = gaussian_overlap_matrix(m_max, y0, bumps.sigma, cfg.omega_y)
            perturbation += ox[np.ix_(n_index, n_index)] * oy[np.ix_(m_index, m_index)]
        perturbation *= bumps.amplitude
        # Exact symmetry: every unordered pair gets one value
        upper = np.triu(perturbation)
        hamiltonian = hamiltonian + upper + np.triu(upper, 1).T

    logger.info(f"Diagonalizing truncated basis of {size} modes with {len(bumps)} bumps")
    energies, vectors = sp_linalg.eigh(hamiltonian)
    return TruncatedSolution(basis, energies, vectors, cfg)


def first_order_shifts(basis: Sequence[HgIndex], bumps: BumpSet, cfg: PotentialConfig) -> np.ndarray:
    """Diagonal bump elements <a|V_imp|a>, the first-order energy shifts."""
    return np.array([
        sum(bump_matrix_element(idx, idx, tuple(r0), bumps.sigma, bumps.amplitude, cfg)
            for r0 in bumps.positions)
        for idx in basis
    ])
