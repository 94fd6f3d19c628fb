"""Classical Lissajous orbits of the unperturbed oscillator."""

from .lissajous import OrbitKind, LissajousOrbit, make_orbit, classify_kind, orbit_family, tube_indices

__all__ = ["OrbitKind", "LissajousOrbit", "make_orbit", "classify_kind", "orbit_family", "tube_indices"]
