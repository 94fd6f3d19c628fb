"""Spectral (discrete Fourier) representation of the kinetic energy -1/2 nabla^2."""

import logging
from functools import lru_cache

import numpy as np
from scipy import fft as sp_fft

from ..utils.process_info import fft_workers
from .fields import StateFunction
from .grid import GridSpec

logger = logging.getLogger("LissajousScars.lattice")

# Largest tolerated boundary/peak amplitude ratio for an open-space state
BOUNDARY_DECAY_LIMIT = 1e-6


@lru_cache(maxsize=16)
def kinetic_symbol(grid: GridSpec) -> np.ndarray:
    """1/2 (kx^2 + ky^2) on the FFT frequency layout of ``grid``.

    Frequencies follow the standard layout 0, 1, ..., n/2-1, -n/2, ..., -1
    (times 2 pi / box length); the Nyquist entry has the same square either way.
    """
    kx = 2.0 * np.pi * sp_fft.fftfreq(grid.points_x, d=grid.spacing_x)
    ky = 2.0 * np.pi * sp_fft.fftfreq(grid.points_y, d=grid.spacing_y)
    symbol = 0.5 * (kx[np.newaxis, :] ** 2 + ky[:, np.newaxis] ** 2)
    symbol.setflags(write=False)
    return symbol


def kinetic_propagator(grid: GridSpec, dtau: float) -> np.ndarray:
    """Diagonal imaginary-time kinetic factor exp(-dtau * T(k))."""
    return np.exp(-dtau * kinetic_symbol(grid))


def forward(amplitudes: np.ndarray) -> np.ndarray:
    """Unitary 2-D transform over the last two axes (accepts stacks of states)."""
    return sp_fft.fft2(amplitudes, axes=(-2, -1), norm="ortho", workers=fft_workers())


def inverse(coefficients: np.ndarray) -> np.ndarray:
    return sp_fft.ifft2(coefficients, axes=(-2, -1), norm="ortho", workers=fft_workers())


def apply_diagonal(amplitudes: np.ndarray, factor: np.ndarray) -> np.ndarray:
    """Multiply by a diagonal-in-k operator: inverse(factor * forward(psi))."""
    return inverse(factor * forward(amplitudes))


def kinetic_apply(psi: StateFunction) -> StateFunction:
    """Return -1/2 nabla^2 psi on the periodic box.

    A state that has not decayed at the box boundary feels its periodic
    images; the result is still returned but a warning is logged.
    """
    ratio = psi.boundary_ratio()
    if ratio >= BOUNDARY_DECAY_LIMIT:
        logger.warning(
            f"State has not decayed at the box boundary (ratio {ratio:.2e}); "
            "kinetic energy is unreliable"
        )
    result = apply_diagonal(psi.amplitudes, kinetic_symbol(psi.grid))
    return StateFunction(psi.grid, result)
