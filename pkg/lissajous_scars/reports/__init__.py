"""Result persistence: wavefunction archives and exported tables."""

from .exporter import Exporter, atomic_write, density_graymap
from .archive import WavefunctionArchive

__all__ = ["Exporter", "atomic_write", "density_graymap", "WavefunctionArchive"]
