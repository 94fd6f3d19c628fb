"""Scar detection by tube overlap with Lissajous orbit templates."""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..classical.lissajous import LissajousOrbit, OrbitKind, distance_to_orbit, orbit_family, tube_indices
from ..errors import ConfigError, UnresolvableModeError
from ..lattice.fields import StateFunction
from ..lattice.grid import GridSpec
from ..oracle.hermite import enumerate_modes, hg_mode, unperturbed_energy
from ..potential.bumps import BumpSet
from ..potential.confinement import PotentialConfig, classical_area
from ..solver.itp import EigenSolution
from .localization import alpha_value

logger = logging.getLogger("LissajousScars.analysis")

DEFAULT_THRESHOLD = 2.0

# A flagged state must beat the best unperturbed mode on its tube by this factor; 0 disables the check
DEFAULT_BASELINE_MARGIN = 1.0

# Template banks are rebuilt when the state energy moves by more than this relative amount
ENERGY_BIN = 0.01


def default_tube_width(energy: float) -> float:
    """Local de Broglie wavelength 2 pi / sqrt(2E)."""
    return 2.0 * math.pi / math.sqrt(2.0 * energy)


@dataclass(frozen=True, eq=False)
class Tube:
    """Grid nodes within half a tube width of one template orbit.

    ``baseline`` is the largest s reached on this tube by an unperturbed
    Hermite-Gaussian mode of nearby energy (0 when not computed).
    """

    orbit: LissajousOrbit
    indices: np.ndarray
    fraction: float
    inside: bool
    baseline: float = 0.0


def build_tubes(grid: GridSpec, templates: Sequence[LissajousOrbit], width: float,
                cfg: PotentialConfig) -> List[Tube]:
    """Tube node sets and area fractions f = tube area / classical ellipse area."""
    tubes = []
    for orbit in templates:
        indices, inside = tube_indices(grid, orbit, width)
        fraction = len(indices) * grid.cell_area / classical_area(orbit.energy, cfg)
        tubes.append(Tube(orbit, indices, fraction, inside))
    return tubes


@dataclass(frozen=True)
class ScarFit:
    s: float
    orbit: Optional[LissajousOrbit]
    tube: Optional[Tube] = field(default=None, repr=False)


def _tube_score(flat: np.ndarray, cell_area: float, tube: Tube) -> float:
    return float(flat[tube.indices].sum()) * cell_area / tube.fraction


def best_tube(density: np.ndarray, cell_area: float, tubes: Sequence[Tube]) -> ScarFit:
    """max over tubes of P_tube / f_tube; tubes leaving the grid are skipped."""
    flat = density.ravel()
    best = ScarFit(0.0, None)
    skipped = 0
    for tube in tubes:
        if not tube.inside or len(tube.indices) == 0:
            skipped += 1
            continue
        s = _tube_score(flat, cell_area, tube)
        if best.orbit is None or s > best.s:
            best = ScarFit(s, tube.orbit, tube)
    if skipped:
        logger.warning(f"Skipped {skipped} of {len(tubes)} templates whose tube leaves the grid")
    return best


def scar_measure(
    psi: StateFunction,
    templates: Sequence[LissajousOrbit],
    tube_width: Optional[float],
    cfg: PotentialConfig,
) -> Tuple[float, Optional[LissajousOrbit]]:
    """Largest tube-overlap enhancement of |psi|^2 over the template orbits.

    For each template, P_tube is the probability within tube_width/2 of the
    orbit and f_tube the tube's share of the classical ellipse area; the
    measure is max P_tube / f_tube, about 1 for a featureless state.

    Args:
        psi: Normalized state
        templates: Nonempty orbit bank
        tube_width: Tube width; None uses the local wavelength at psi.energy
        cfg: Confinement frequencies for the ellipse area

    Returns:
        (s, best orbit); (0.0, None) if every tube left the grid
    """
    if len(templates) == 0:
        raise ConfigError("scar_measure needs at least one template orbit")
    if tube_width is None:
        tube_width = default_tube_width(psi.energy if psi.energy else templates[0].energy)
    if not tube_width > 0:
        raise ConfigError(f"tube width must be positive, got {tube_width!r}")
    fit = best_tube(psi.density(), psi.grid.cell_area, build_tubes(psi.grid, templates, tube_width, cfg))
    return fit.s, fit.orbit


class TemplateBank:
    """Orbit families and their tubes, cached per energy bin.

    Templates for candidate (p', q') keep the confinement's omega_y, i.e.
    their base frequency is omega_y / q'. States whose energies fall in the
    same relative bin of width ``ENERGY_BIN`` share one bank.

    With a positive ``baseline_margin`` every tube also carries the largest s
    that an unperturbed Hermite-Gaussian mode within one quantum of the bin
    energy reaches on it. Product modes have rectangular symmetry, so this
    is the score a tube gives without any orbit-shaped localization.
    """

    def __init__(self, grid: GridSpec, cfg: PotentialConfig, candidates: Sequence[Tuple[int, int]],
                 n_eta: int = 9, n_phi: int = 32, tube_width: Optional[float] = None,
                 samples_per_period: Optional[int] = None,
                 baseline_margin: float = DEFAULT_BASELINE_MARGIN):
        if not baseline_margin >= 0:
            raise ConfigError(f"baseline margin must be >= 0, got {baseline_margin!r}")
        self.grid = grid
        self.cfg = cfg
        self.candidates = [(int(p), int(q)) for p, q in candidates]
        self.n_eta = n_eta
        self.n_phi = n_phi
        self.tube_width = tube_width
        self.samples_per_period = samples_per_period
        self.baseline_margin = baseline_margin
        self._cache: Dict[int, Tuple[float, List[Tube]]] = {}

    def _key(self, energy: float) -> int:
        return int(round(math.log(energy) / math.log1p(ENERGY_BIN)))

    def width_for(self, energy: float) -> float:
        return self.tube_width if self.tube_width is not None else default_tube_width(energy)

    def tubes_for(self, energy: float) -> List[Tube]:
        key = self._key(energy)
        if key not in self._cache:
            bin_energy = math.exp(key * math.log1p(ENERGY_BIN))
            templates = []
            for p, q in self.candidates:
                templates.extend(orbit_family(
                    p, q, bin_energy, self.n_eta, self.n_phi,
                    self.samples_per_period, omega0=self.cfg.omega_y / q,
                ))
            tubes = build_tubes(self.grid, templates, self.width_for(bin_energy), self.cfg)
            if self.baseline_margin > 0:
                tubes = self._with_baselines(bin_energy, tubes)
            self._cache[key] = (bin_energy, tubes)
            logger.debug(f"Template bank for E~{bin_energy:.4f}: {len(tubes)} tubes")
        return self._cache[key][1]

    def unperturbed_modes(self, e_min: float, e_max: float) -> List[StateFunction]:
        """Resolvable Hermite-Gaussian modes with e_min <= E_nm <= e_max on the bank's grid."""
        cfg = self.cfg.unperturbed()
        modes = []
        for idx in enumerate_modes(e_max, cfg):
            if unperturbed_energy(idx, cfg) < e_min:
                continue
            try:
                modes.append(hg_mode(idx, self.grid, cfg))
            except UnresolvableModeError:
                logger.debug(f"Mode ({idx.n},{idx.m}) is not resolved by the grid; left out of the baseline")
        return modes

    def _with_baselines(self, energy: float, tubes: List[Tube]) -> List[Tube]:
        # Window covers one level spacing plus the bin width, so a mode always meets its own bin
        window = max(self.cfg.omega_x, self.cfg.omega_y) + ENERGY_BIN * energy
        densities = [mode.density().ravel() for mode in self.unperturbed_modes(energy - window, energy + window)]
        cell_area = self.grid.cell_area
        result = []
        for tube in tubes:
            if not tube.inside or len(tube.indices) == 0:
                result.append(tube)
                continue
            baseline = max((_tube_score(flat, cell_area, tube) for flat in densities), default=0.0)
            result.append(replace(tube, baseline=baseline))
        return result


@dataclass(frozen=True)
class ScarReport:
    """Per-state scar diagnostics. ``s`` and the orbit fields are None without candidates.

    ``baseline`` is the unperturbed-mode score of the best-fit tube, None when
    the baseline check is off.
    """

    index: int
    energy: float
    alpha: float
    s: Optional[float] = None
    p: Optional[int] = None
    q: Optional[int] = None
    eta: Optional[float] = None
    phi: Optional[float] = None
    kind: Optional[OrbitKind] = None
    strongly_scarred: bool = False
    bumps_on_orbit: Optional[int] = None
    bump_enhancement: Optional[float] = None
    baseline: Optional[float] = None

    @property
    def kind_label(self) -> str:
        return self.kind.value if self.kind is not None else "none"


@dataclass(frozen=True)
class SurveyResult:
    """``raw_fraction`` counts s >= threshold alone, without the baseline check."""

    reports: List[ScarReport]
    fraction: float
    threshold: float
    raw_fraction: float = 0.0
    bank: Optional[TemplateBank] = field(default=None, repr=False, compare=False)

    @property
    def scarred(self) -> List[ScarReport]:
        return [r for r in self.reports if r.strongly_scarred]


def bumps_near_orbit(bumps: BumpSet, orbit: LissajousOrbit, width: float) -> int:
    if len(bumps) == 0:
        return 0
    return int(np.count_nonzero(distance_to_orbit(bumps.positions, orbit) < 0.5 * width))


def _report(index: int, psi: StateFunction, cfg: PotentialConfig, bank: Optional[TemplateBank],
            threshold: float, bumps: Optional[BumpSet]) -> ScarReport:
    alpha = alpha_value(psi, psi.energy, cfg)
    if bank is None:
        return ScarReport(index=index, energy=psi.energy, alpha=alpha)

    fit = best_tube(psi.density(), psi.grid.cell_area, bank.tubes_for(psi.energy))
    if fit.orbit is None:
        return ScarReport(index=index, energy=psi.energy, alpha=alpha, s=0.0)

    baseline = fit.tube.baseline if bank.baseline_margin > 0 else None
    flagged = fit.s >= threshold and fit.s > bank.baseline_margin * fit.tube.baseline
    on_orbit = enhancement = None
    if bumps is not None:
        width = bank.width_for(fit.orbit.energy)
        on_orbit = bumps_near_orbit(bumps, fit.orbit, width)
        expected = len(fit.tube.indices) * psi.grid.cell_area * cfg.density
        enhancement = on_orbit / expected if expected > 0 else None
    return ScarReport(
        index=index, energy=psi.energy, alpha=alpha, s=fit.s,
        p=fit.orbit.p, q=fit.orbit.q, eta=fit.orbit.eta, phi=fit.orbit.phi,
        kind=fit.orbit.kind if flagged else None,
        strongly_scarred=flagged,
        bumps_on_orbit=on_orbit, bump_enhancement=enhancement,
        baseline=baseline,
    )


def scar_survey(
    solution: EigenSolution,
    cfg: PotentialConfig,
    candidates: Sequence[Tuple[int, int]],
    threshold: float = DEFAULT_THRESHOLD,
    tube_width: Optional[float] = None,
    n_eta: int = 9,
    n_phi: int = 32,
    bumps: Optional[BumpSet] = None,
    samples_per_period: Optional[int] = None,
    baseline_margin: float = DEFAULT_BASELINE_MARGIN,
) -> SurveyResult:
    """Scar report for every state and the fraction flagged as strongly scarred.

    A state is strongly scarred when its best tube scores s >= threshold and
    s > baseline_margin times the best unperturbed Hermite-Gaussian score on
    that tube, so the oscillator's own product modes are never flagged.

    Args:
        solution: Eigenpairs, ideally converged
        cfg: Potential the states were solved in
        candidates: (p, q) orbit families to test; empty gives alpha-only reports
        threshold: s at or above which a state counts as strongly scarred
        tube_width: Fixed tube width; None uses the local wavelength per state
        n_eta, n_phi: Template bank resolution per candidate
        bumps: Bump set, to count bumps on the best-fit orbit
        baseline_margin: Factor over the unperturbed-mode score; 0 turns the check off
    """
    if not solution.all_converged:
        logger.warning("Surveying a solution with unconverged states")
    bank = None
    if candidates:
        bank = TemplateBank(solution.grid, cfg, candidates, n_eta, n_phi, tube_width, samples_per_period,
                            baseline_margin)

    reports = [_report(i, psi, cfg, bank, threshold, bumps) for i, psi in enumerate(solution.states)]
    flagged = sum(1 for r in reports if r.strongly_scarred)
    raw = sum(1 for r in reports if r.s is not None and r.s >= threshold)
    fraction = flagged / len(reports) if reports else 0.0
    raw_fraction = raw / len(reports) if reports else 0.0
    logger.info(f"Scar survey: {flagged} of {len(reports)} states scarred at s >= {threshold:g} "
                f"(fraction {fraction:.3f}, {raw} above threshold before the baseline check)")
    return SurveyResult(reports, fraction, threshold, raw_fraction, bank)


def unperturbed_census(bank: TemplateBank, e_min: float, e_max: float, threshold: float) -> float:
    """Fraction of unperturbed Hermite-Gaussian modes in [e_min, e_max] whose s reaches threshold.

    This is the noise floor of the plain threshold test: product modes show
    no orbit features, yet some of them score high on axis-hugging tubes.
    """
    counted = flagged = 0
    for mode in bank.unperturbed_modes(e_min, e_max):
        fit = best_tube(mode.density(), mode.grid.cell_area, bank.tubes_for(mode.energy))
        counted += 1
        if fit.orbit is not None and fit.s >= threshold:
            flagged += 1
    return flagged / counted if counted else 0.0


@dataclass(frozen=True)
class DeviationRow:
    """alpha_mean averages the top-s looplike scars; ``short`` marks fewer than requested."""

    delta: float
    alpha_mean: float
    ratio: float
    scar_count: int
    n_used: int
    short: bool


def top_loop_alpha(survey: SurveyResult, n_scars: int) -> Tuple[float, int]:
    """Mean alpha of the n_scars highest-s looplike scarred states, and how many were used."""
    loops = [r for r in survey.scarred if r.kind is OrbitKind.LOOP]
    loops.sort(key=lambda r: (-r.s, r.index))
    chosen = loops[:n_scars]
    if not chosen:
        return float("nan"), 0
    return float(np.mean([r.alpha for r in chosen])), len(chosen)


def deviation_scan(
    deltas: Sequence[float],
    base_config: PotentialConfig,
    n_scars: int,
    solve_at: Callable[[PotentialConfig], EigenSolution],
    bumps: Optional[BumpSet] = None,
    threshold: float = DEFAULT_THRESHOLD,
    tube_width: Optional[float] = None,
    n_eta: int = 9,
    n_phi: int = 32,
    solutions: Optional[Mapping[float, EigenSolution]] = None,
    baseline_margin: float = DEFAULT_BASELINE_MARGIN,
) -> List[DeviationRow]:
    """Scar strength as the confinement is detuned from p/q by delta.

    For every delta the system is solved at omega_x/omega_y = p/q + delta
    with the same bumps, the (p, q) survey is run, and the mean alpha of the
    strongest looplike scars is normalized by its value at delta = 0.

    Args:
        deltas: Detunings; must contain 0
        base_config: Commensurable configuration
        n_scars: Scars averaged per delta
        solve_at: Solves the detuned configuration (used when ``solutions``
            lacks that delta)
        bumps: Shared bump set for the bump-on-orbit columns
        solutions: Precomputed eigenpairs keyed by delta
        baseline_margin: Passed to scar_survey

    Returns:
        Rows in the order of ``deltas``
    """
    if not any(d == 0 for d in deltas):
        raise ConfigError("deviation scan needs delta = 0 for normalization")
    if n_scars < 1:
        raise ConfigError(f"n_scars must be >= 1, got {n_scars!r}")
    solutions = dict(solutions or {})
    candidates = [(base_config.p, base_config.q)]

    measured = {}
    for delta in deltas:
        cfg = base_config.with_deviation(delta) if delta != 0 else base_config
        solution = solutions.get(delta)
        if solution is None:
            solution = solve_at(cfg)
        survey = scar_survey(solution, cfg, candidates, threshold, tube_width, n_eta, n_phi, bumps,
                             baseline_margin=baseline_margin)
        alpha_mean, used = top_loop_alpha(survey, n_scars)
        if used < n_scars:
            logger.warning(f"delta={delta:+.4f}: only {used} looplike scars found, wanted {n_scars}")
        measured[delta] = (alpha_mean, len(survey.scarred), used)

    reference = measured[0.0][0]
    rows = []
    for delta in deltas:
        alpha_mean, count, used = measured[delta]
        ratio = reference / alpha_mean if used and alpha_mean > 0 else float("nan")
        rows.append(DeviationRow(float(delta), alpha_mean, ratio, count, used, used < n_scars))
    return rows
