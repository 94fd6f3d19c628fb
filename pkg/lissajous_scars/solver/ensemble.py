"""Ensemble operations: initialization, Loewdin orthonormalization, subspace rotation.

Internally an ensemble is a complex array of shape (k, ny, nx). The public
functions accept and return lists of StateFunction.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg as sp_linalg

from ..errors import GridError, GridMismatchError, RankDeficiencyError
from ..lattice.fields import ScalarField, StateFunction
from ..lattice.grid import GridSpec
from ..lattice.spectral import apply_diagonal, kinetic_symbol
from ..oracle.hermite import enumerate_modes, hg_mode, unperturbed_energy
from ..potential.confinement import PotentialConfig

logger = logging.getLogger("LissajousScars.solver")

MAX_CONDITION_NUMBER = 1e12


def stack_states(states: Sequence[StateFunction]) -> Tuple[GridSpec, np.ndarray]:
    """Stack states into one (k, ny, nx) array, checking they share a grid."""
    if not states:
        raise GridError("empty ensemble")
    grid = states[0].grid
    for state in states[1:]:
        if state.grid != grid:
            raise GridMismatchError("ensemble members live on different grids")
    return grid, np.stack([state.amplitudes for state in states])


def unstack_states(grid: GridSpec, amplitudes: np.ndarray,
                   energies: Optional[Sequence[float]] = None) -> List[StateFunction]:
    return [
        StateFunction(grid, amplitudes[i], None if energies is None else float(energies[i]))
        for i in range(amplitudes.shape[0])
    ]


def apply_hamiltonian(grid: GridSpec, amplitudes: np.ndarray, potential: ScalarField) -> np.ndarray:
    """H psi = -1/2 nabla^2 psi + V psi for a stack of states."""
    return apply_diagonal(amplitudes, kinetic_symbol(grid)) + potential.values * amplitudes


def _matrix(grid: GridSpec, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """M_ij = <left_i|right_j> with a fixed summation order."""
    k = left.shape[0]
    return (left.reshape(k, -1).conj() @ right.reshape(k, -1).T) * grid.cell_area


def _combine(amplitudes: np.ndarray, mixing: np.ndarray) -> np.ndarray:
    """psi'_j = sum_i psi_i mixing_ij."""
    k = amplitudes.shape[0]
    return (mixing.T @ amplitudes.reshape(k, -1)).reshape(amplitudes.shape)


def rayleigh_quotients(grid: GridSpec, amplitudes: np.ndarray, potential: ScalarField) -> np.ndarray:
    """<psi_i|H|psi_i> / <psi_i|psi_i> per state."""
    h_psi = apply_hamiltonian(grid, amplitudes, potential)
    k = amplitudes.shape[0]
    flat, h_flat = amplitudes.reshape(k, -1), h_psi.reshape(k, -1)
    numerator = np.einsum("ij,ij->i", flat.conj(), h_flat).real
    denominator = np.einsum("ij,ij->i", flat.conj(), flat).real
    return numerator / denominator


def residual_norms(grid: GridSpec, amplitudes: np.ndarray, potential: ScalarField,
                   energies: np.ndarray) -> np.ndarray:
    """||H psi - E psi|| per state (discrete L2 norm)."""
    residual = apply_hamiltonian(grid, amplitudes, potential) - energies[:, None, None] * amplitudes
    k = amplitudes.shape[0]
    return np.sqrt(np.sum(np.abs(residual.reshape(k, -1)) ** 2, axis=1) * grid.cell_area)


def orthonormalize_array(grid: GridSpec, amplitudes: np.ndarray) -> np.ndarray:
    """Symmetric (Loewdin) orthonormalization psi' = psi S^(-1/2)."""
    overlap = _matrix(grid, amplitudes, amplitudes)
    overlap = 0.5 * (overlap + overlap.conj().T)
    eigenvalues, vectors = sp_linalg.eigh(overlap)
    smallest, largest = eigenvalues[0], eigenvalues[-1]
    if smallest <= 0 or largest / smallest > MAX_CONDITION_NUMBER:
        condition = np.inf if smallest <= 0 else largest / smallest
        raise RankDeficiencyError(
            f"ensemble overlap matrix is rank deficient (condition number {condition:.3e})"
        )
    inverse_sqrt = (vectors / np.sqrt(eigenvalues)) @ vectors.conj().T
    return _combine(amplitudes, inverse_sqrt)


def subspace_rotate_array(grid: GridSpec, amplitudes: np.ndarray,
                          potential: ScalarField) -> Tuple[np.ndarray, np.ndarray]:
    """Rotate an orthonormal ensemble onto the eigenvectors of its k x k Hamiltonian.

    Returns:
        Tuple of (rotated amplitudes, ascending Ritz energies)
    """
    h_psi = apply_hamiltonian(grid, amplitudes, potential)
    hamiltonian = _matrix(grid, amplitudes, h_psi)
    hamiltonian = 0.5 * (hamiltonian + hamiltonian.conj().T)
    energies, vectors = sp_linalg.eigh(hamiltonian)
    return _combine(amplitudes, vectors), energies


def orthonormalize(states: Sequence[StateFunction]) -> List[StateFunction]:
    """Loewdin orthonormalization of a list of states.

    Raises:
        RankDeficiencyError: the Gram matrix has condition number above 1e12
    """
    grid, amplitudes = stack_states(states)
    return unstack_states(grid, orthonormalize_array(grid, amplitudes))


def subspace_rotate(states: Sequence[StateFunction], potential: ScalarField) -> List[StateFunction]:
    """Diagonalize H within the span of an orthonormal ensemble.

    Output states are tagged with their Ritz energies in ascending order.
    """
    grid, amplitudes = stack_states(states)
    if potential.grid != grid:
        raise GridMismatchError("potential and ensemble live on different grids")
    rotated, energies = subspace_rotate_array(grid, amplitudes, potential)
    return unstack_states(grid, rotated, energies)


def _random_smooth_states(k: int, grid: GridSpec, seed: int) -> np.ndarray:
    """Seeded random ensemble: white noise low-pass filtered and Gaussian-enveloped."""
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((k,) + grid.shape) + 1j * rng.standard_normal((k,) + grid.shape)
    # Keep only long wavelengths so the ensemble starts with moderate energy
    cutoff = 0.05 * kinetic_symbol(grid).max()
    smooth = apply_diagonal(noise, (kinetic_symbol(grid) < cutoff).astype(np.float64))
    x, y = grid.mesh()
    envelope = np.exp(-0.5 * ((x / (0.5 * grid.extent_x)) ** 2 + (y / (0.5 * grid.extent_y)) ** 2))
    return smooth * envelope


def init_states(
    k: int,
    grid: GridSpec,
    seed: int = 0,
    potential: Optional[PotentialConfig] = None,
    random: bool = False,
) -> List[StateFunction]:
    """Initial orthonormal ensemble of k states.

    By default the k lowest unperturbed Hermite-Gaussian modes of
    ``potential`` (isotropic omega = 1 when None), which already span the
    low-energy subspace. With ``random=True`` a seeded random ensemble is
    used instead.

    Raises:
        GridError: k exceeds a quarter of the grid nodes
    """
    if k < 1:
        raise GridError(f"k must be at least 1, got {k}")
    if k > grid.size // 4:
        raise GridError(f"k={k} is too large for a grid of {grid.size} nodes")

    if random:
        amplitudes = orthonormalize_array(grid, _random_smooth_states(k, grid, seed))
        return unstack_states(grid, amplitudes)

    if potential is None:
        potential = PotentialConfig(p=1, q=1, amplitude=0.0)

    # Grow the cutoff until at least k modes are available
    e_cut = 0.5 * (potential.omega_x + potential.omega_y)
    modes = enumerate_modes(e_cut, potential)
    while len(modes) < k:
        e_cut += min(potential.omega_x, potential.omega_y)
        modes = enumerate_modes(e_cut, potential)

    states = [hg_mode(idx, grid, potential) for idx in modes[:k]]
    logger.debug(
        f"Initialized {k} Hermite-Gaussian modes up to E={unperturbed_energy(modes[k - 1], potential):.4f}"
    )
    return states
