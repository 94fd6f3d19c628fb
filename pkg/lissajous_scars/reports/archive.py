"""Binary wavefunction archive.

Layout, all little-endian:

    offset  size      field
    0       5         magic b"QLSC1"
    5       3         zero padding
    8       4         uint32 points_x
    12      4         uint32 points_y
    16      8         float64 extent_x
    24      8         float64 extent_y
    32      8         uint64 state count k
    40      8 k       float64 energies (NaN when unknown)
    40+8k   16 k n    per state, points_y * points_x complex128 values
                      (real, imaginary) in row-major order

The file length is therefore exactly 40 + 8 k + 16 k points_x points_y.
"""

import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence

import numpy as np

from ..errors import ArchiveError, GridError
from ..lattice.fields import StateFunction
from ..lattice.grid import GridSpec
from .exporter import atomic_write

logger = logging.getLogger("LissajousScars.reports")

MAGIC = b"QLSC1"
HEADER = struct.Struct("<5s3xIIddQ")
ENERGY_DTYPE = np.dtype("<f8")
PAYLOAD_DTYPE = np.dtype("<c16")


@dataclass(frozen=True, eq=False)
class WavefunctionArchive:
    """States of one grid with their energies, shape (k, points_y, points_x)."""

    grid: GridSpec
    energies: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        energies = np.asarray(self.energies, dtype=np.float64).ravel()
        amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if amplitudes.ndim != 3 or amplitudes.shape[1:] != self.grid.shape:
            raise GridError(f"archive payload shape {amplitudes.shape} does not match grid {self.grid.shape}")
        if len(energies) != amplitudes.shape[0]:
            raise GridError(f"{len(energies)} energies for {amplitudes.shape[0]} states")
        object.__setattr__(self, "energies", energies)
        object.__setattr__(self, "amplitudes", amplitudes)

    def __len__(self) -> int:
        return len(self.energies)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WavefunctionArchive):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.energies.tobytes() == other.energies.tobytes()
            and self.amplitudes.tobytes() == other.amplitudes.tobytes()
        )

    @classmethod
    def from_states(cls, states: Sequence[StateFunction]) -> "WavefunctionArchive":
        if not states:
            raise GridError("cannot archive an empty list of states")
        grid = states[0].grid
        energies = [math.nan if s.energy is None else s.energy for s in states]
        return cls(grid, np.array(energies), np.stack([s.amplitudes for s in states]))

    def to_states(self) -> List[StateFunction]:
        return [
            StateFunction(self.grid, self.amplitudes[i], None if math.isnan(e) else float(e))
            for i, e in enumerate(self.energies)
        ]

    def to_bytes(self) -> bytes:
        header = HEADER.pack(
            MAGIC, self.grid.points_x, self.grid.points_y,
            self.grid.extent_x, self.grid.extent_y, len(self),
        )
        return header + self.energies.astype(ENERGY_DTYPE).tobytes() + self.amplitudes.astype(PAYLOAD_DTYPE).tobytes()

    def write(self, path: Path) -> Path:
        """Write atomically (temp file + rename)."""
        path = Path(path)
        try:
            with atomic_write(path, binary=True) as f:
                f.write(self.to_bytes())
        except OSError as e:
            raise ArchiveError(f"cannot write archive {path}: {e}") from e
        logger.info(f"Wrote {len(self)} states to {path}")
        return path

    @classmethod
    def from_bytes(cls, data: bytes, source: str = "<bytes>") -> "WavefunctionArchive":
        if len(data) < HEADER.size:
            raise ArchiveError(f"{source}: {len(data)} bytes is shorter than the {HEADER.size}-byte header")
        magic, nx, ny, lx, ly, k = HEADER.unpack_from(data)
        if magic != MAGIC:
            raise ArchiveError(f"{source}: bad magic {magic!r}, expected {MAGIC!r}")
        expected = HEADER.size + 8 * k + 16 * k * nx * ny
        if len(data) != expected:
            raise ArchiveError(f"{source}: length {len(data)} does not match header ({expected} bytes)")
        try:
            grid = GridSpec(extent_x=lx, extent_y=ly, points_x=nx, points_y=ny)
        except GridError as e:
            raise ArchiveError(f"{source}: invalid grid in header: {e}") from e

        energies = np.frombuffer(data, dtype=ENERGY_DTYPE, count=k, offset=HEADER.size)
        payload = np.frombuffer(data, dtype=PAYLOAD_DTYPE, count=k * nx * ny, offset=HEADER.size + 8 * k)
        return cls(grid, energies.astype(np.float64), payload.reshape(k, ny, nx).astype(np.complex128))

    @classmethod
    def read(cls, path: Path) -> "WavefunctionArchive":
        path = Path(path)
        try:
            data = path.read_bytes()
        except OSError as e:
            raise ArchiveError(f"cannot read archive {path}: {e}") from e
        archive = cls.from_bytes(data, str(path))
        logger.debug(f"Read {len(archive)} states on {archive.grid.points_x}x{archive.grid.points_y} from {path}")
        return archive
