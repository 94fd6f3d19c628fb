"""Hermite-Gaussian modes of the unperturbed anisotropic oscillator."""

import math
from dataclasses import dataclass
from typing import List

import numpy as np

from ..errors import ConfigError, UnresolvableModeError
from ..lattice.fields import StateFunction
from ..lattice.grid import GridSpec
from ..potential.confinement import PotentialConfig

# Modes must oscillate no faster than one wavelength per this many nodes
MIN_NODES_PER_WAVELENGTH = 4.0


@dataclass(frozen=True, order=True)
class HgIndex:
    """Hermite orders (n, m) in x and y."""

    n: int
    m: int

    def __post_init__(self):
        for name in ("n", "m"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 0:
                raise ConfigError(f"Hermite order {name} must be a nonnegative integer, got {value!r}")


def hermite_functions(n_max: int, xi: np.ndarray) -> np.ndarray:
    """Normalized Hermite functions phi_0 .. phi_{n_max} at the points ``xi``.

    phi_n(xi) = H_n(xi) exp(-xi^2/2) / sqrt(2^n n! sqrt(pi)), built with the
    three-term recurrence
    phi_{n+1} = sqrt(2/(n+1)) xi phi_n - sqrt(n/(n+1)) phi_{n-1},
    which never forms factorials or raw polynomial values.

    Returns:
        Array of shape (n_max + 1,) + xi.shape
    """
    xi = np.asarray(xi, dtype=np.float64)
    table = np.empty((n_max + 1,) + xi.shape)
    table[0] = np.pi ** -0.25 * np.exp(-0.5 * xi ** 2)
    if n_max >= 1:
        table[1] = math.sqrt(2.0) * xi * table[0]
    for n in range(1, n_max):
        table[n + 1] = math.sqrt(2.0 / (n + 1)) * xi * table[n] - math.sqrt(n / (n + 1)) * table[n - 1]
    return table


def oscillator_functions(n_max: int, coordinate: np.ndarray, omega: float) -> np.ndarray:
    """1-D oscillator eigenfunctions omega^(1/4) phi_n(sqrt(omega) x)."""
    return omega ** 0.25 * hermite_functions(n_max, math.sqrt(omega) * np.asarray(coordinate))


def unperturbed_energy(idx: HgIndex, cfg: PotentialConfig) -> float:
    """omega_x (n + 1/2) + omega_y (m + 1/2)."""
    return cfg.omega_x * (idx.n + 0.5) + cfg.omega_y * (idx.m + 0.5)


def _check_resolvable(order: int, omega: float, spacing: float, axis: str):
    # Shortest local wavelength of a 1-D mode is 2 pi / sqrt(2 E_1d)
    wavelength = 2.0 * math.pi / math.sqrt(omega * (2 * order + 1))
    if wavelength < MIN_NODES_PER_WAVELENGTH * spacing:
        raise UnresolvableModeError(
            f"order {order} along {axis} has wavelength {wavelength:.4g} "
            f"< {MIN_NODES_PER_WAVELENGTH:g} x spacing {spacing:.4g}"
        )


def hg_mode(idx: HgIndex, grid: GridSpec, cfg: PotentialConfig) -> StateFunction:
    """Sample Psi_{n,m} on the grid and renormalize it discretely.

    Raises:
        UnresolvableModeError: the mode's local wavelength is shorter than 4 spacings
    """
    _check_resolvable(idx.n, cfg.omega_x, grid.spacing_x, "x")
    _check_resolvable(idx.m, cfg.omega_y, grid.spacing_y, "y")

    fx = oscillator_functions(idx.n, grid.x, cfg.omega_x)[idx.n]
    fy = oscillator_functions(idx.m, grid.y, cfg.omega_y)[idx.m]
    state = StateFunction(grid, fy[:, None] * fx[None, :], unperturbed_energy(idx, cfg))
    return state.normalized()


def enumerate_modes(e_cut: float, cfg: PotentialConfig) -> List[HgIndex]:
    """All (n, m) with unperturbed energy <= e_cut, by energy then n."""
    tolerance = 1e-12 * max(1.0, abs(e_cut))
    modes = []
    m = 0
    while cfg.omega_y * (m + 0.5) + 0.5 * cfg.omega_x <= e_cut + tolerance:
        n = 0
        while cfg.omega_x * (n + 0.5) + cfg.omega_y * (m + 0.5) <= e_cut + tolerance:
            modes.append(HgIndex(n, m))
            n += 1
        m += 1
    modes.sort(key=lambda idx: (unperturbed_energy(idx, cfg), idx.n))
    return modes


def resonant_sets(cfg: PotentialConfig, e_cut: float, tolerance: float = 1e-9) -> List[List[HgIndex]]:
    """Group modes up to ``e_cut`` into (near-)degenerate levels.

    Consecutive modes whose energies differ by at most ``tolerance`` share a
    set. At commensurable frequencies these are the exactly degenerate levels;
    with a finite tolerance they also collect near-degeneracies of a detuned
    oscillator.
    """
    groups: List[List[HgIndex]] = []
    last_energy = None
    for idx in enumerate_modes(e_cut, cfg):
        energy = unperturbed_energy(idx, cfg)
        if last_energy is not None and energy - last_energy <= tolerance:
            groups[-1].append(idx)
        else:
            groups.append([idx])
        last_energy = energy
    return groups
