"""Gaussian-smoothed density of states and level statistics."""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from ..errors import ConfigError
from ..oracle.hermite import enumerate_modes, unperturbed_energy
from ..potential.confinement import PotentialConfig

logger = logging.getLogger("LissajousScars.analysis")

DEFAULT_WINDOW = 0.001

# Levels further than this many window widths from a sample do not contribute
WINDOW_CUTOFF = 10.0


class SpectrumSource(Enum):
    ANALYTIC = "analytic"
    SOLVED = "solved"


@dataclass(frozen=True, eq=False)
class DosCurve:
    """D(E) sampled on ``energies`` for the input ``levels``."""

    energies: np.ndarray
    values: np.ndarray
    sigma: float
    levels: np.ndarray

    def at(self, energy: float) -> float:
        """Exact D(energy) from the stored levels."""
        return float(_gaussian_sum(np.array([energy]), self.levels, self.sigma)[0])

    def integral(self) -> float:
        return float(trapezoid(self.values, self.energies))

    def __add__(self, other: "DosCurve") -> "DosCurve":
        if self.sigma != other.sigma or not np.array_equal(self.energies, other.energies):
            raise ConfigError("DOS curves must share window and sample grid to be added")
        levels = np.sort(np.concatenate([self.levels, other.levels]))
        return DosCurve(self.energies, self.values + other.values, self.sigma, levels)


def _gaussian_sum(samples: np.ndarray, levels: np.ndarray, sigma: float) -> np.ndarray:
    out = np.zeros(len(samples))
    if len(levels) == 0 or len(samples) == 0:
        return out
    order = np.argsort(samples)
    sorted_samples = samples[order]
    reach = WINDOW_CUTOFF * sigma
    norm = 1.0 / math.sqrt(2.0 * math.pi * sigma ** 2)
    accumulated = np.zeros(len(samples))
    for level in np.sort(levels):
        lo = np.searchsorted(sorted_samples, level - reach, side="left")
        hi = np.searchsorted(sorted_samples, level + reach, side="right")
        if lo == hi:
            continue
        window = sorted_samples[lo:hi]
        accumulated[lo:hi] += norm * np.exp(-0.5 * ((window - level) / sigma) ** 2)
    out[order] = accumulated
    return out


def dos(energies: Sequence[float], sigma: float = DEFAULT_WINDOW,
        samples: Optional[Sequence[float]] = None) -> DosCurve:
    """Sum of normalized Gaussians of width ``sigma`` centred on each level.

    Args:
        energies: Level energies (a.u.), any order, may be empty
        sigma: Window width
        samples: Energies where D is evaluated; defaults to a sigma/4 grid
            spanning the levels with a 10 sigma margin

    Returns:
        DosCurve
    """
    if not sigma > 0:
        raise ConfigError(f"DOS window must be positive, got {sigma!r}")
    levels = np.asarray(energies, dtype=np.float64).ravel()
    if samples is None:
        if len(levels):
            lo, hi = levels.min() - WINDOW_CUTOFF * sigma, levels.max() + WINDOW_CUTOFF * sigma
        else:
            lo, hi = 0.0, 1.0
        samples = np.arange(lo, hi + 0.125 * sigma, 0.25 * sigma)
    samples = np.asarray(samples, dtype=np.float64).ravel()
    return DosCurve(samples, _gaussian_sum(samples, levels, sigma), float(sigma), np.sort(levels))


def degeneracy_weight(curve: DosCurve, energy: float) -> float:
    """Number of levels under the peak at ``energy``: D(E) sqrt(2 pi) sigma."""
    return curve.at(energy) * math.sqrt(2.0 * math.pi) * curve.sigma


@dataclass(frozen=True, eq=False)
class DosMatrix:
    """One DosCurve per frequency ratio on a shared energy grid."""

    ratios: np.ndarray
    curves: List[DosCurve]

    @property
    def energies(self) -> np.ndarray:
        return self.curves[0].energies

    @property
    def values(self) -> np.ndarray:
        """Array of shape (n_ratios, n_energies)."""
        return np.vstack([curve.values for curve in self.curves])

    def max_weights(self) -> np.ndarray:
        """Largest degeneracy weight at any level, per ratio."""
        return np.array([
            max((degeneracy_weight(curve, level) for level in curve.levels), default=0.0)
            for curve in self.curves
        ])


def ratio_config(ratio: float, omega0: float = 1.0) -> PotentialConfig:
    """Unperturbed oscillator with omega_x = omega0 and omega_y = omega0 / ratio."""
    if not 0.0 < ratio <= 1.0:
        raise ConfigError(f"frequency ratio must lie in (0, 1], got {ratio!r}")
    return PotentialConfig(p=1, q=1, omega0=omega0 / ratio, ratio_override=ratio, amplitude=0.0)


def dos_ratio_scan(
    ratios: Sequence[float],
    e_max: float,
    sigma: float = DEFAULT_WINDOW,
    source: SpectrumSource = SpectrumSource.ANALYTIC,
    samples: Optional[Sequence[float]] = None,
    solved: Optional[Callable[[float], Sequence[float]]] = None,
) -> DosMatrix:
    """DOS below ``e_max`` as a function of omega_x / omega_y.

    The analytic source enumerates Hermite-Gaussian levels of
    ``ratio_config(ratio)``; the solved source calls ``solved(ratio)`` for
    the eigenvalues of a numerical run at that ratio.
    """
    source = SpectrumSource(source)
    if source is SpectrumSource.SOLVED and solved is None:
        raise ConfigError("solved DOS scan needs a callable returning the eigenvalues per ratio")
    if samples is None:
        samples = np.arange(0.0, e_max + 0.125 * sigma, 0.25 * sigma)
    samples = np.asarray(samples, dtype=np.float64)

    ratios = np.asarray(ratios, dtype=np.float64)
    curves = []
    for ratio in ratios:
        if source is SpectrumSource.ANALYTIC:
            cfg = ratio_config(float(ratio))
            levels = [unperturbed_energy(idx, cfg) for idx in enumerate_modes(e_max, cfg)]
        else:
            levels = [e for e in solved(float(ratio)) if e <= e_max]
        curves.append(dos(levels, sigma, samples))
        logger.debug(f"ratio={ratio:.6f} levels={len(levels)}")
    return DosMatrix(ratios, curves)


def level_spacing_ratios(energies: Sequence[float]) -> np.ndarray:
    """Consecutive-spacing ratios r_n = min(s_n, s_{n+1}) / max(s_n, s_{n+1}).

    Pairs of zero spacings (exact degeneracies) carry no information and are
    dropped. Independent of the local level density, so no unfolding is needed.
    """
    levels = np.sort(np.asarray(energies, dtype=np.float64))
    spacings = np.diff(levels)
    if len(spacings) < 2:
        return np.empty(0)
    lo = np.minimum(spacings[:-1], spacings[1:])
    hi = np.maximum(spacings[:-1], spacings[1:])
    keep = hi > 0
    return lo[keep] / hi[keep]


def mean_spacing_ratio(energies: Sequence[float]) -> float:
    """<r>; about 0.386 for uncorrelated levels and 0.536 under level repulsion (GOE)."""
    ratios = level_spacing_ratios(energies)
    return float(ratios.mean()) if len(ratios) else float("nan")
