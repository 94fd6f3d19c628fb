"""Exception hierarchy shared by the library and the command line."""


class ScarLabError(Exception):
    """Base class for every error raised by lissajous_scars."""


class GridError(ScarLabError, ValueError):
    """Invalid grid parameters or a field that does not fit its grid."""


class GridMismatchError(GridError):
    """Two fields or states live on different grids."""


class UnresolvableModeError(GridError):
    """A Hermite-Gaussian mode oscillates faster than the grid can sample."""


class ConfigError(ScarLabError, ValueError):
    """Invalid or unknown configuration value."""


class OrbitError(ScarLabError, ValueError):
    """Invalid classical orbit parameters."""


class NumericalError(ScarLabError, ArithmeticError):
    """A numerical procedure failed or produced non-finite values."""


class RankDeficiencyError(NumericalError):
    """The overlap matrix of an ensemble is (numerically) singular."""


class StepRejectedError(NumericalError):
    """An imaginary-time step over- or underflowed and must be retried."""


class QuadratureOverflowError(NumericalError):
    """Gauss-Hermite quadrature cannot represent the requested orders."""


class BasisTooLargeError(NumericalError):
    """The truncated Hermite-Gaussian basis exceeds the dense-solver limit."""


class ArchiveError(ScarLabError, OSError):
    """Wavefunction archive is missing, truncated or corrupt."""
