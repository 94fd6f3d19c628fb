"""Anisotropic harmonic confinement 1/2 (wx^2 x^2 + wy^2 y^2)."""

import math
from dataclasses import dataclass, replace
from typing import Optional

from ..errors import ConfigError
from ..lattice.fields import ScalarField
from ..lattice.grid import GridSpec

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))

DEFAULT_FWHM = 0.235


@dataclass(frozen=True)
class PotentialConfig:
    """Confinement frequencies and bump-disorder parameters.

    ``omega_x = p * omega0`` and ``omega_y = q * omega0`` unless
    ``ratio_override`` is set, in which case ``omega_y = q * omega0`` is kept
    and ``omega_x = ratio_override * omega_y``.
    """

    p: int = 1
    q: int = 2
    omega0: float = 1.0
    ratio_override: Optional[float] = None
    amplitude: float = 4.0
    sigma: float = DEFAULT_FWHM / FWHM_PER_SIGMA
    density: float = 2.0
    seed: int = 0
    scatter_energy: float = 100.0
    fixed_count: bool = False

    def __post_init__(self):
        for name in ("p", "q"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not self.omega0 > 0:
            raise ConfigError(f"omega0 must be positive, got {self.omega0!r}")
        if self.ratio_override is not None and not self.ratio_override > 0:
            raise ConfigError(f"ratio_override must be positive, got {self.ratio_override!r}")
        if not self.amplitude >= 0:
            raise ConfigError(f"bump amplitude must be >= 0, got {self.amplitude!r}")
        if not self.sigma > 0:
            raise ConfigError(f"bump width must be positive, got {self.sigma!r}")
        if not self.density >= 0:
            raise ConfigError(f"bump density must be >= 0, got {self.density!r}")
        if not self.scatter_energy > 0:
            raise ConfigError(f"scatter_energy must be positive, got {self.scatter_energy!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")

    @classmethod
    def from_fwhm(cls, fwhm: float = DEFAULT_FWHM, **kwargs) -> "PotentialConfig":
        """Build a config whose bump width is given as a full width at half maximum."""
        return cls(sigma=fwhm / FWHM_PER_SIGMA, **kwargs)

    @property
    def omega_y(self) -> float:
        return self.q * self.omega0

    @property
    def omega_x(self) -> float:
        if self.ratio_override is not None:
            return self.ratio_override * self.omega_y
        return self.p * self.omega0

    @property
    def ratio(self) -> float:
        """Frequency ratio omega_x / omega_y."""
        return self.omega_x / self.omega_y

    @property
    def fwhm(self) -> float:
        return FWHM_PER_SIGMA * self.sigma

    def with_deviation(self, delta: float) -> "PotentialConfig":
        """Same config detuned to omega_x / omega_y = p/q + delta."""
        return replace(self, ratio_override=self.p / self.q + delta)

    def unperturbed(self) -> "PotentialConfig":
        return replace(self, amplitude=0.0)


def classical_area(energy: float, cfg: PotentialConfig) -> float:
    """Area of the classically allowed ellipse 1/2 (wx^2 x^2 + wy^2 y^2) <= E."""
    return 2.0 * math.pi * energy / (cfg.omega_x * cfg.omega_y)


def harmonic_potential(grid: GridSpec, cfg: PotentialConfig) -> ScalarField:
    """Sample 1/2 (wx^2 x^2 + wy^2 y^2) on every node."""
    vx = 0.5 * (cfg.omega_x * grid.x) ** 2
    vy = 0.5 * (cfg.omega_y * grid.y) ** 2
    return ScalarField(grid, vy[:, None] + vx[None, :])
