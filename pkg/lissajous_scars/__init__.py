"""Lissajous Scars - eigenstates of a bumpy anisotropic oscillator and their scarring."""

__version__ = "1.0.0"
