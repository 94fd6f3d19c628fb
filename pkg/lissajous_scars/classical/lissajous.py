"""Closed Lissajous orbits x = A cos(p w0 t + phi), y = B cos(q w0 t)."""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from ..errors import OrbitError
from ..lattice.grid import GridSpec

logger = logging.getLogger("LissajousScars.classical")

MIN_SAMPLES_PER_FREQUENCY = 64

# Hausdorff tolerance of the retracing test, relative to sqrt(2E)
RETRACE_TOLERANCE = 1e-6

# Nearest vertices examined per point when projecting onto the polyline
SEGMENT_CANDIDATES = 4


class OrbitKind(Enum):
    STRING = "string"
    LOOP = "loop"


@dataclass(frozen=True, eq=False)
class LissajousOrbit:
    """One closed orbit sampled uniformly over a period T = 2 pi / omega0.

    ``samples`` has shape (N, 2) with rows (x, y) at ``times``; the endpoint
    t = T is not repeated.
    """

    p: int
    q: int
    energy: float
    eta: float
    phi: float
    omega0: float
    times: np.ndarray = field(repr=False)
    samples: np.ndarray = field(repr=False)
    kind: OrbitKind = OrbitKind.LOOP

    @property
    def omega_x(self) -> float:
        return self.p * self.omega0

    @property
    def omega_y(self) -> float:
        return self.q * self.omega0

    @property
    def amplitude_x(self) -> float:
        return math.sqrt(2.0 * self.eta * self.energy) / self.omega_x

    @property
    def amplitude_y(self) -> float:
        return math.sqrt(2.0 * (1.0 - self.eta) * self.energy) / self.omega_y

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega0

    def position(self, t) -> np.ndarray:
        """(x, y) at time(s) t; shape (..., 2)."""
        t = np.asarray(t, dtype=np.float64)
        x = self.amplitude_x * np.cos(self.omega_x * t + self.phi)
        y = self.amplitude_y * np.cos(self.omega_y * t)
        return np.stack([x, y], axis=-1)

    def velocity(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        vx = -self.amplitude_x * self.omega_x * np.sin(self.omega_x * t + self.phi)
        vy = -self.amplitude_y * self.omega_y * np.sin(self.omega_y * t)
        return np.stack([vx, vy], axis=-1)

    def closure_residual(self) -> float:
        """|r(T) - r(0)|."""
        return float(np.linalg.norm(self.position(self.period) - self.position(0.0)))

    def energy_along(self) -> np.ndarray:
        """Total energy at every sample, from the analytic velocity."""
        r = self.samples
        v = self.velocity(self.times)
        kinetic = 0.5 * np.sum(v ** 2, axis=1)
        potential = 0.5 * ((self.omega_x * r[:, 0]) ** 2 + (self.omega_y * r[:, 1]) ** 2)
        return kinetic + potential

    def label(self) -> str:
        return f"({self.p},{self.q}) eta={self.eta:.4f} phi={self.phi:.4f} {self.kind.value}"


def _check_frequencies(p: int, q: int):
    for name, value in (("p", p), ("q", q)):
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
            raise OrbitError(f"{name} must be a positive integer, got {value!r}")
    divisor = math.gcd(int(p), int(q))
    if divisor != 1:
        raise OrbitError(
            f"({p},{q}) are not coprime; reduce the ratio to ({p // divisor},{q // divisor})"
        )


def make_orbit(
    p: int,
    q: int,
    energy: float,
    eta: float,
    phi: float,
    samples_per_period: Optional[int] = None,
    omega0: float = 1.0,
) -> LissajousOrbit:
    """Sample the closed orbit with frequencies (p w0, q w0) at energy E.

    A fraction ``eta`` of the energy sits in the x motion, so the amplitudes
    are A = sqrt(2 eta E)/w_x and B = sqrt(2 (1-eta) E)/w_y.

    Args:
        p, q: Coprime frequency multiples
        energy: Orbit energy (a.u.)
        eta: Energy fraction of the x mode, 0 < eta < 1
        phi: Phase of x relative to y (radians)
        samples_per_period: Polyline size, at least 64 * max(p, q) (the default)
        omega0: Base frequency

    Raises:
        OrbitError: non-coprime (p, q) or parameters out of range
    """
    _check_frequencies(p, q)
    if not energy > 0:
        raise OrbitError(f"orbit energy must be positive, got {energy!r}")
    if not 0.0 < eta < 1.0:
        raise OrbitError(f"eta must lie in (0, 1), got {eta!r}")
    if not omega0 > 0:
        raise OrbitError(f"omega0 must be positive, got {omega0!r}")

    minimum = MIN_SAMPLES_PER_FREQUENCY * max(p, q)
    if samples_per_period is None:
        samples_per_period = minimum
    if samples_per_period < minimum:
        raise OrbitError(f"need at least {minimum} samples per period, got {samples_per_period}")
    # An even count puts t = T/2 on a sample, which the retracing test relies on
    samples_per_period += samples_per_period % 2

    period = 2.0 * math.pi / omega0
    times = np.arange(samples_per_period) * (period / samples_per_period)
    orbit = LissajousOrbit(
        p=int(p), q=int(q), energy=float(energy), eta=float(eta), phi=float(phi),
        omega0=float(omega0), times=times, samples=np.empty((0, 2)),
    )
    orbit = replace(orbit, samples=orbit.position(times))
    return replace(orbit, kind=classify_kind(orbit))


def _hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    d_ab, _ = cKDTree(b).query(a)
    d_ba, _ = cKDTree(a).query(b)
    return float(max(d_ab.max(), d_ba.max()))


def classify_kind(orbit: LissajousOrbit) -> OrbitKind:
    """STRING if the curve retraces itself, LOOP otherwise.

    A self-retracing curve reverses at a point where both velocity
    components vanish, which can only happen at a zero of y' (t = j pi /
    (q w0)). Starting the clock there, the point sets traced over the first
    and second half period coincide exactly for a string.
    """
    n = len(orbit.times)
    half = n // 2
    tolerance = RETRACE_TOLERANCE * math.sqrt(2.0 * orbit.energy)
    step = orbit.period / n
    for j in range(2 * orbit.q):
        start = j * math.pi / orbit.omega_y
        points = orbit.position(start + np.arange(n + 1) * step)
        if _hausdorff(points[:half + 1], points[half:]) < tolerance:
            return OrbitKind.STRING
    return OrbitKind.LOOP


def orbit_family(
    p: int,
    q: int,
    energy: float,
    n_eta: int,
    n_phi: int,
    samples_per_period: Optional[int] = None,
    omega0: float = 1.0,
) -> List[LissajousOrbit]:
    """Template bank over eta = (i+1)/(n_eta+1) and phi = 2 pi j / n_phi.

    Ordered eta-major, so ``family[i * n_phi + j]`` has the i-th eta and
    j-th phase.
    """
    if n_eta < 1 or n_phi < 1:
        raise OrbitError(f"n_eta and n_phi must be >= 1, got {n_eta}, {n_phi}")
    _check_frequencies(p, q)
    etas = [(i + 1) / (n_eta + 1) for i in range(n_eta)]
    phis = [2.0 * math.pi * j / n_phi for j in range(n_phi)]
    family = [
        make_orbit(p, q, energy, eta, phi, samples_per_period, omega0)
        for eta in etas
        for phi in phis
    ]
    logger.debug(f"Built {len(family)} ({p},{q}) templates at E={energy:.4f}")
    return family


def distance_to_orbit(points: np.ndarray, orbit: LissajousOrbit) -> np.ndarray:
    """Distance from each (x, y) row of ``points`` to the closed sample polyline.

    The few nearest vertices are found with a k-d tree and the distance is
    the smallest projection onto the segments adjacent to them.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    vertices = orbit.samples
    n = len(vertices)
    k = min(SEGMENT_CANDIDATES, n)
    _, nearest = cKDTree(vertices).query(points, k=k)
    nearest = np.asarray(nearest).reshape(len(points), k)

    best = np.full(len(points), np.inf)
    for offset in (-1, 0):
        start = vertices[(nearest + offset) % n]
        end = vertices[(nearest + offset + 1) % n]
        seg = end - start
        length2 = np.sum(seg ** 2, axis=-1)
        rel = points[:, None, :] - start
        t = np.divide(np.sum(rel * seg, axis=-1), length2, out=np.zeros_like(length2), where=length2 > 0)
        t = np.clip(t, 0.0, 1.0)
        d = np.linalg.norm(rel - t[..., None] * seg, axis=-1)
        best = np.minimum(best, d.min(axis=1))
    return best


def _densify(vertices: np.ndarray, step: float) -> np.ndarray:
    """Points along the closed polyline no further than ``step`` apart."""
    closed = np.vstack([vertices, vertices[:1]])
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(closed, axis=0), axis=1))])
    s = np.linspace(0.0, arc[-1], max(int(np.ceil(arc[-1] / step)), 1) + 1)
    return np.column_stack([np.interp(s, arc, closed[:, 0]), np.interp(s, arc, closed[:, 1])])


def tube_indices(grid: GridSpec, orbit: LissajousOrbit, width: float) -> Tuple[np.ndarray, bool]:
    """Flat indices of the grid nodes closer than width/2 to the orbit.

    Candidate nodes are collected from a stencil around a densified copy of
    the polyline and then filtered by exact segment distance.

    Returns:
        (sorted indices into the row-major grid, True if the tube stays inside the box)
    """
    if not width > 0:
        raise OrbitError(f"tube width must be positive, got {width!r}")
    half = 0.5 * width
    inside = grid.contains(orbit.samples[:, 0], orbit.samples[:, 1], margin=half)

    dense = _densify(orbit.samples, 0.5 * min(grid.spacing_x, grid.spacing_y))
    ci = np.rint((dense[:, 0] + grid.extent_x) / grid.spacing_x).astype(np.int64)
    cj = np.rint((dense[:, 1] + grid.extent_y) / grid.spacing_y).astype(np.int64)
    ri = int(math.ceil(half / grid.spacing_x)) + 1
    rj = int(math.ceil(half / grid.spacing_y)) + 1
    di, dj = np.meshgrid(np.arange(-ri, ri + 1), np.arange(-rj, rj + 1), indexing="xy")

    ii = (ci[:, None] + di.ravel()[None, :]).ravel()
    jj = (cj[:, None] + dj.ravel()[None, :]).ravel()
    valid = (ii >= 0) & (ii < grid.points_x) & (jj >= 0) & (jj < grid.points_y)
    flat = np.unique(jj[valid] * grid.points_x + ii[valid])
    if len(flat) == 0:
        return flat, inside

    rows, cols = np.divmod(flat, grid.points_x)
    points = np.column_stack([grid.x[cols], grid.y[rows]])
    return flat[distance_to_orbit(points, orbit) < half], inside
