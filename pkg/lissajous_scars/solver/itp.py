"""Lowest eigenpairs by imaginary-time propagation with Strang splitting."""

import logging
import math
import sys
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..errors import ConfigError, GridMismatchError, NumericalError, StepRejectedError
from ..lattice.fields import ScalarField, StateFunction
from ..lattice.grid import GridSpec
from ..lattice.spectral import BOUNDARY_DECAY_LIMIT, forward, inverse, kinetic_propagator
from ..potential.confinement import PotentialConfig
from .ensemble import (
    init_states, orthonormalize_array, residual_norms, stack_states, subspace_rotate_array,
    unstack_states,
)

logger = logging.getLogger("LissajousScars.solver")

# Largest exponent a float64 exp() can take without overflowing
MAX_EXPONENT = math.log(sys.float_info.max)


@dataclass(frozen=True)
class ItpConfig:
    """Imaginary-time solver settings.

    ``guard_states`` extra states are propagated above the k reported ones so
    that the top of the reported block is not pinned against the ensemble
    edge; they are dropped from the result and ignored for convergence.
    """

    k: int = 10
    dtau_initial: float = 0.1
    dtau_min: float = 1e-3
    tolerance: float = 1e-8
    max_iterations: int = 20000
    seed: int = 0
    random_init: bool = False
    guard_states: int = 2
    log_every: int = 100

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 1:
            raise ConfigError(f"k must be a positive integer, got {self.k!r}")
        if not self.dtau_initial > self.dtau_min > 0:
            raise ConfigError(
                f"need dtau_initial > dtau_min > 0, got {self.dtau_initial!r}, {self.dtau_min!r}"
            )
        if not self.tolerance > 0:
            raise ConfigError(f"tolerance must be positive, got {self.tolerance!r}")
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be positive, got {self.max_iterations!r}")
        if self.guard_states < 0:
            raise ConfigError(f"guard_states must be >= 0, got {self.guard_states!r}")
        if self.log_every < 1:
            raise ConfigError(f"log_every must be positive, got {self.log_every!r}")


@dataclass(frozen=True, eq=False)
class EigenSolution:
    """Ascending eigenpairs with convergence metadata."""

    states: List[StateFunction]
    residuals: np.ndarray
    iterations: int
    converged: np.ndarray
    final_dtau: float = field(default=float("nan"))

    @property
    def energies(self) -> np.ndarray:
        return np.array([state.energy for state in self.states])

    @property
    def grid(self) -> GridSpec:
        return self.states[0].grid

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))

    def __len__(self) -> int:
        return len(self.states)


class _SplitPropagator:
    """Strang factors exp(-dtau T/2) exp(-dtau V) exp(-dtau T/2) for one dtau."""

    def __init__(self, grid: GridSpec, potential: ScalarField, dtau: float):
        v_min = float(potential.values.min())
        span = float(potential.values.max()) - v_min
        if dtau * span > MAX_EXPONENT:
            raise StepRejectedError(f"dtau={dtau:.3e} times potential span {span:.3e} overflows")
        self.dtau = dtau
        self.kinetic_half = kinetic_propagator(grid, 0.5 * dtau)
        # Shifting V by its minimum only rescales every state, which normalization removes
        self.potential_factor = np.exp(-dtau * (potential.values - v_min))

    def apply(self, amplitudes: np.ndarray) -> np.ndarray:
        result = inverse(self.kinetic_half * forward(amplitudes))
        result = self.potential_factor * result
        return inverse(self.kinetic_half * forward(result))


def _normalize_rows(grid: GridSpec, amplitudes: np.ndarray) -> np.ndarray:
    k = amplitudes.shape[0]
    norms = np.sqrt(np.sum(np.abs(amplitudes.reshape(k, -1)) ** 2, axis=1) * grid.cell_area)
    if not np.all(np.isfinite(norms)) or np.any(norms == 0.0):
        raise StepRejectedError("a state vanished or became non-finite during the step")
    return amplitudes / norms[:, None, None]


def itp_step(states: Sequence[StateFunction], potential: ScalarField, dtau: float) -> List[StateFunction]:
    """One Strang-split imaginary-time step, then renormalize each state.

    Raises:
        StepRejectedError: dtau * (max V - min V) overflows or a state vanishes
    """
    if not dtau > 0:
        raise ConfigError(f"dtau must be positive, got {dtau!r}")
    grid, amplitudes = stack_states(states)
    if potential.grid != grid:
        raise GridMismatchError("potential and ensemble live on different grids")
    propagator = _SplitPropagator(grid, potential, dtau)
    return unstack_states(grid, _normalize_rows(grid, propagator.apply(amplitudes)))


def solve(
    grid: GridSpec,
    potential: ScalarField,
    cfg: ItpConfig,
    potential_config: Optional[PotentialConfig] = None,
    initial: Optional[Sequence[StateFunction]] = None,
) -> EigenSolution:
    """Propagate an ensemble in imaginary time until its energies settle.

    Each sweep is: Strang step, Loewdin orthonormalization, subspace
    rotation. dtau is halved whenever the largest per-state energy change in
    a sweep drops below 10 * tolerance, down to dtau_min. The run has
    converged once dtau sits at dtau_min and every reported energy moved by
    less than tolerance in the last sweep.

    Args:
        grid: Discretization
        potential: Total potential sampled on ``grid``
        cfg: Solver settings
        potential_config: Frequencies for Hermite-Gaussian initialization
        initial: Explicit starting ensemble (overrides initialization)

    Returns:
        EigenSolution with the k lowest states; unconverged states are flagged
    """
    if potential.grid != grid:
        raise GridMismatchError("potential and grid differ")

    n_total = cfg.k + cfg.guard_states
    if initial is None:
        initial = init_states(
            n_total, grid, cfg.seed, potential_config,
            random=cfg.random_init,
        )
    _, amplitudes = stack_states(list(initial))
    n_total = amplitudes.shape[0]
    if n_total < cfg.k:
        raise ConfigError(f"initial ensemble has {n_total} states, need at least {cfg.k}")
    reported = slice(0, cfg.k)

    amplitudes = orthonormalize_array(grid, amplitudes)
    amplitudes, energies = subspace_rotate_array(grid, amplitudes, potential)

    dtau = cfg.dtau_initial
    propagator = None
    delta = np.full(n_total, np.inf)
    at_floor = False
    sweep = 0

    logger.info(f"Starting imaginary-time propagation: k={cfg.k} (+{n_total - cfg.k} guard), "
                f"grid {grid.points_x}x{grid.points_y}, dtau={dtau:.3e}")

    while sweep < cfg.max_iterations:
        if propagator is None or propagator.dtau != dtau:
            try:
                propagator = _SplitPropagator(grid, potential, dtau)
            except StepRejectedError as e:
                logger.warning(f"Step rejected ({e}); halving dtau")
                dtau = _halve(dtau, cfg)
                continue

        sweep += 1
        try:
            stepped = _normalize_rows(grid, propagator.apply(amplitudes))
        except StepRejectedError as e:
            logger.warning(f"Step rejected at sweep {sweep} ({e}); halving dtau")
            dtau = _halve(dtau, cfg)
            continue

        stepped = orthonormalize_array(grid, stepped)
        stepped, new_energies = subspace_rotate_array(grid, stepped, potential)
        delta = np.abs(new_energies - energies)
        amplitudes, energies = stepped, new_energies
        max_delta = float(delta[reported].max())
        at_floor = dtau <= cfg.dtau_min

        if sweep % cfg.log_every == 0:
            _log_progress(sweep, dtau, max_delta, grid, amplitudes[reported], potential, energies[reported])

        if at_floor and max_delta < cfg.tolerance:
            break
        if not at_floor and max_delta < 10.0 * cfg.tolerance:
            dtau = max(0.5 * dtau, cfg.dtau_min)
            logger.debug(f"sweep={sweep} dtau reduced to {dtau:.3e}")

    amplitudes = amplitudes[reported]
    energies = energies[reported]
    residuals = residual_norms(grid, amplitudes, potential, energies)
    converged = (delta[reported] < cfg.tolerance) & at_floor
    _log_progress(sweep, dtau, float(delta[reported].max()), grid, amplitudes, potential, energies,
                  residuals=residuals)

    if not np.all(converged):
        logger.warning(
            f"{int(np.count_nonzero(~converged))} of {cfg.k} states unconverged "
            f"after {sweep} sweeps (max_iterations={cfg.max_iterations})"
        )
    else:
        logger.info(f"Converged {cfg.k} states in {sweep} sweeps")

    states = unstack_states(grid, amplitudes, energies)
    leaking = [i for i, s in enumerate(states) if s.boundary_ratio() >= BOUNDARY_DECAY_LIMIT]
    if leaking:
        logger.warning(
            f"States {leaking} have not decayed at the box boundary; enlarge the grid"
        )

    return EigenSolution(
        states=states,
        residuals=residuals,
        iterations=sweep,
        converged=converged,
        final_dtau=dtau,
    )


def _halve(dtau: float, cfg: ItpConfig) -> float:
    if dtau <= cfg.dtau_min:
        raise NumericalError(f"step rejected at the smallest dtau={dtau:.3e}")
    return max(0.5 * dtau, cfg.dtau_min)


def _log_progress(sweep, dtau, max_delta, grid, amplitudes, potential, energies, residuals=None):
    if residuals is None:
        residuals = residual_norms(grid, amplitudes, potential, energies)
    logger.info(
        f"sweep={sweep} dtau={dtau:.6e} max_dE={max_delta:.6e} "
        f"worst_residual={float(np.max(residuals)):.6e}"
    )
