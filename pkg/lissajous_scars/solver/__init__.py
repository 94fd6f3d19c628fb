"""Imaginary-time propagation of an orthonormal ensemble."""

from .ensemble import init_states, orthonormalize, subspace_rotate, apply_hamiltonian, rayleigh_quotients
from .itp import ItpConfig, EigenSolution, itp_step, solve

__all__ = [
    "init_states", "orthonormalize", "subspace_rotate", "apply_hamiltonian", "rayleigh_quotients",
    "ItpConfig", "EigenSolution", "itp_step", "solve",
]
