"""Run orchestration behind the command-line subcommands.

Each ``cmd_*`` function takes a RunConfig, writes its files into
``config.output_dir`` and returns an outcome object. Library exceptions are
left to propagate; ``app.main`` maps them to exit codes.
"""

import csv
import json
import logging
import queue
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .. import __version__
from ..analysis.scars import DeviationRow, deviation_scan, scar_survey, unperturbed_census
from ..analysis.spectrum import SpectrumSource, dos, dos_ratio_scan, mean_spacing_ratio
from ..classical.lissajous import make_orbit
from ..errors import ConfigError, NumericalError
from ..lattice.grid import GridSpec
from ..oracle.truncated import diagonalize_truncated
from ..potential.bumps import BumpSet, scatter_bumps, total_potential
from ..potential.confinement import PotentialConfig
from ..reports.archive import WavefunctionArchive
from ..reports.exporter import Exporter
from ..solver.ensemble import residual_norms, stack_states
from ..solver.itp import EigenSolution, solve
from ..utils.process_info import ResourceMonitor
from ..utils.settings import RunConfig

logger = logging.getLogger("LissajousScars.runner")

ARCHIVE_NAME = "states.qlsc"
BUMPS_NAME = "bumps.csv"
CONFIG_NAME = "config.json"
METADATA_NAME = "metadata.json"
ANALYSIS_NAME = "analysis.json"

# Residual below which an archived state counts as converged when re-analyzed
ARCHIVE_RESIDUAL_LIMIT = 1e-3

# Working arrays held per state during a solve (ensemble, H psi, FFT buffers)
ARRAYS_PER_STATE = 4


@dataclass
class SolveOutcome:
    output_dir: Path
    archive_path: Path
    metadata_path: Path
    all_converged: bool
    solution: EigenSolution = field(repr=False)


@dataclass
class AnalyzeOutcome:
    output_dir: Path
    files: List[Path]
    fraction: Optional[float]


@dataclass
class ScanOutcome:
    output_dir: Path
    files: List[Path]
    failures: Dict[float, str]


def _solve_system(grid: GridSpec, potential: PotentialConfig, bumps: BumpSet,
                  config: RunConfig, monitor: ResourceMonitor) -> EigenSolution:
    n_states = config.itp.k + config.itp.guard_states
    monitor.check_budget(ARRAYS_PER_STATE * n_states * grid.size * 16, f"ensemble of {n_states} states")
    V, _ = total_potential(grid, potential, bumps)
    solution = solve(grid, V, config.itp, potential)
    monitor.sample()
    return solution


def _solution_summary(solution: EigenSolution) -> Dict:
    return {
        'energies': solution.energies.tolist(),
        'residuals': solution.residuals.tolist(),
        'converged': solution.converged.tolist(),
        'all_converged': solution.all_converged,
        'iterations': solution.iterations,
        'final_dtau': solution.final_dtau,
    }


def _grid_summary(grid: GridSpec) -> Dict:
    return {
        'extent_x': grid.extent_x, 'extent_y': grid.extent_y,
        'points_x': grid.points_x, 'points_y': grid.points_y,
    }


def cmd_solve(config: RunConfig) -> SolveOutcome:
    """Build the potential, solve, and write archive, bumps, config echo and metadata.

    Returns:
        SolveOutcome; ``all_converged`` False means partial outputs were written
    """
    monitor = ResourceMonitor()
    started = time.perf_counter()
    exporter = Exporter(Path(config.output_dir))

    grid = config.resolve_grid()
    bumps = scatter_bumps(config.potential)
    logger.info(f"Grid {grid.points_x}x{grid.points_y} on [{-grid.extent_x:.3f}, {grid.extent_x:.3f}) x "
                f"[{-grid.extent_y:.3f}, {grid.extent_y:.3f}), {len(bumps)} bumps")
    exporter.export_bumps(bumps, BUMPS_NAME)
    config.save(exporter.path(CONFIG_NAME))

    solve_started = time.perf_counter()
    solution = _solve_system(grid, config.potential, bumps, config, monitor)
    solve_seconds = time.perf_counter() - solve_started

    archive_path = WavefunctionArchive.from_states(solution.states).write(exporter.path(ARCHIVE_NAME))

    metadata = {
        'version': __version__,
        'created': datetime.now().isoformat(timespec='seconds'),
        'config': config.to_flat(),
        'seed': config.potential.seed,
        'grid': _grid_summary(grid),
        'bumps': {'count': len(bumps), 'file': BUMPS_NAME},
        'archive': ARCHIVE_NAME,
        'solve': dict(_solution_summary(solution), seconds=solve_seconds),
        'timings': {'total_seconds': time.perf_counter() - started, 'solve_seconds': solve_seconds},
        'machine': monitor.snapshot(),
    }
    if not solution.all_converged:
        metadata['partial'] = True
    metadata_path = exporter.export_metadata(metadata, METADATA_NAME)

    logger.info(f"Solve finished in {solve_seconds:.1f} s; outputs in {exporter.output_dir}")
    return SolveOutcome(exporter.output_dir, archive_path, metadata_path, solution.all_converged, solution)


def _load_bumps(archive_path: Path, potential: PotentialConfig) -> BumpSet:
    path = Path(archive_path).parent / BUMPS_NAME
    if path.exists():
        return BumpSet.from_csv(path, potential.amplitude, potential.sigma, potential.seed)
    return scatter_bumps(potential)


def solution_from_archive(archive: WavefunctionArchive, potential: PotentialConfig,
                          bumps: BumpSet) -> EigenSolution:
    """Rebuild an EigenSolution; residuals are recomputed in the archived grid's potential."""
    states = archive.to_states()
    V, _ = total_potential(archive.grid, potential, bumps)
    grid, amplitudes = stack_states(states)
    residuals = residual_norms(grid, amplitudes, V, archive.energies)
    return EigenSolution(
        states=states,
        residuals=residuals,
        iterations=0,
        converged=residuals < ARCHIVE_RESIDUAL_LIMIT,
    )


def cmd_analyze(archive_path: Path, config: RunConfig,
                image_indices: Sequence[int] = ()) -> AnalyzeOutcome:
    """Scar survey, alpha table, DOS curve and density images for an archive.

    Images are written for every strongly scarred state plus ``image_indices``.
    """
    archive = WavefunctionArchive.read(Path(archive_path))
    potential = config.potential
    analysis = config.analysis
    bumps = _load_bumps(archive_path, potential)
    solution = solution_from_archive(archive, potential, bumps)
    exporter = Exporter(Path(config.output_dir))

    candidates = analysis.candidate_pairs(potential)
    survey = scar_survey(
        solution, potential, candidates,
        threshold=analysis.threshold, tube_width=analysis.tube_width,
        n_eta=analysis.n_eta, n_phi=analysis.n_phi, bumps=bumps,
        samples_per_period=analysis.samples_per_period,
        baseline_margin=analysis.baseline_margin,
    )
    files = [
        exporter.export_scar_reports(survey.reports),
        exporter.export_alpha(survey.reports),
        exporter.export_dos(dos(solution.energies, analysis.dos_window)),
    ]

    baseline_fraction = None
    if survey.bank is not None and len(solution):
        # Plain-threshold fraction of the unperturbed modes spanning the same energies
        baseline_fraction = unperturbed_census(
            survey.bank, float(solution.energies.min()), float(solution.energies.max()), analysis.threshold,
        )
        logger.info(f"Unperturbed baseline fraction {baseline_fraction:.3f}; survey fraction {survey.fraction:.3f}")

    wanted = {int(i) for i in image_indices}
    if analysis.export_images:
        wanted |= {r.index for r in survey.scarred}
    by_index = {r.index: r for r in survey.reports}
    for index in sorted(wanted):
        if not 0 <= index < len(solution):
            raise ConfigError(f"image index {index} outside 0..{len(solution) - 1}")
        files.append(exporter.export_density_image(solution.states[index], f"density_{index:04d}.pgm"))
        report = by_index[index]
        if report.p is not None:
            orbit = make_orbit(report.p, report.q, report.energy, report.eta, report.phi,
                               analysis.samples_per_period, omega0=potential.omega_y / report.q)
            files.append(exporter.export_orbit(orbit, f"orbit_{index:04d}.csv"))

    summary = {
        'archive': str(archive_path),
        'states': len(solution),
        'candidates': [list(c) for c in candidates],
        'threshold': analysis.threshold,
        'fraction': survey.fraction if candidates else None,
        'raw_fraction': survey.raw_fraction if candidates else None,
        'baseline_fraction': baseline_fraction,
        'baseline_margin': analysis.baseline_margin,
        'scarred': [r.index for r in survey.scarred],
        'mean_spacing_ratio': mean_spacing_ratio(solution.energies),
        'worst_residual': float(np.max(solution.residuals)) if len(solution) else None,
    }
    files.append(exporter.export_metadata(summary, ANALYSIS_NAME))
    return AnalyzeOutcome(exporter.output_dir, files, summary['fraction'])


def run_points(points: Sequence[float], job: Callable[[float], object],
               workers: int = 1) -> Tuple[Dict[float, object], Dict[float, str]]:
    """Run ``job`` for every point on worker threads fed from a queue.

    A failing point is logged and recorded; the other points continue.

    Returns:
        (results by point, error messages by point)
    """
    tasks: "queue.Queue[float]" = queue.Queue()
    for point in points:
        tasks.put(point)
    results: Dict[float, object] = {}
    failures: Dict[float, str] = {}
    lock = threading.Lock()

    def worker():
        while True:
            try:
                point = tasks.get_nowait()
            except queue.Empty:
                return
            try:
                value = job(point)
                with lock:
                    results[point] = value
            except Exception as e:
                logger.warning(f"Scan point {point!r} failed: {e}", exc_info=True)
                with lock:
                    failures[point] = f"{type(e).__name__}: {e}"
            finally:
                tasks.task_done()

    threads = [threading.Thread(target=worker, daemon=True) for _ in range(max(1, min(workers, len(points))))]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    return results, failures


def cmd_scan(config: RunConfig, mode: str, values: Optional[Sequence[float]] = None,
             source: SpectrumSource = SpectrumSource.ANALYTIC) -> ScanOutcome:
    """Ratio scan (DOS matrix) or deviation scan (alpha ratio table).

    Args:
        config: Run configuration; scan points default to analysis.ratios / analysis.deltas
        mode: "ratio" or "deviation"
        values: Explicit scan points
        source: Spectrum source for the ratio scan

    Returns:
        ScanOutcome listing written files and failed points
    """
    exporter = Exporter(Path(config.output_dir))
    analysis = config.analysis
    base = config.potential
    monitor = ResourceMonitor()
    files: List[Path] = []
    failures: Dict[float, str] = {}
    bumps = scatter_bumps(base)

    def solve_at(potential: PotentialConfig) -> EigenSolution:
        run = config.with_potential(potential)
        return _solve_system(run.resolve_grid(), potential, bumps, run, monitor)

    if mode == "ratio":
        ratios = list(values) if values is not None else list(analysis.ratios)
        source = SpectrumSource(source)
        spectra = {}
        if source is SpectrumSource.SOLVED:
            def job(ratio):
                return solve_at(base.with_deviation(ratio - base.p / base.q)).energies
            spectra, failures = run_points(ratios, job, analysis.scan_workers)
            ratios = [r for r in ratios if r in spectra]
        matrix = dos_ratio_scan(ratios, analysis.scan_e_max, analysis.dos_window, source,
                                solved=spectra.get if source is SpectrumSource.SOLVED else None)
        files.append(exporter.export_dos_matrix(matrix))
        files.append(exporter.export_dos_weights(matrix))

    elif mode == "deviation":
        deltas = list(values) if values is not None else list(analysis.deltas)
        if not any(d == 0 for d in deltas):
            raise ConfigError("deviation scan needs delta = 0 for normalization")
        exporter.export_bumps(bumps, BUMPS_NAME)

        def job(delta):
            return solve_at(base.with_deviation(delta) if delta != 0 else base)
        solutions, failures = run_points(deltas, job, analysis.scan_workers)
        if 0.0 not in solutions:
            raise NumericalError(f"reference point delta=0 failed: {failures.get(0.0)}")
        solved = [d for d in deltas if d in solutions]
        rows: List[DeviationRow] = deviation_scan(
            solved, base, analysis.n_scars, solve_at, bumps=bumps,
            threshold=analysis.threshold, tube_width=analysis.tube_width,
            n_eta=analysis.n_eta, n_phi=analysis.n_phi, solutions=solutions,
            baseline_margin=analysis.baseline_margin,
        )
        files.append(exporter.export_deviation(rows))
    else:
        raise ConfigError(f"unknown scan mode {mode!r}; use 'ratio' or 'deviation'")

    summary = {
        'mode': mode,
        'config': config.to_flat(),
        'failures': {repr(k): v for k, v in failures.items()},
        'machine': monitor.snapshot(),
    }
    files.append(exporter.export_metadata(summary, f"scan_{mode}.json"))
    if failures:
        logger.warning(f"{len(failures)} scan point(s) failed; see scan_{mode}.json")
    return ScanOutcome(exporter.output_dir, files, failures)


def cmd_export(target: str, config: RunConfig, output: Optional[Path] = None, **options) -> Path:
    """Export an orbit polyline, truncated-basis coefficients or a PDF run report.

    Options per target:
        orbit: p, q, energy, eta, phi, samples
        oracle: e_cut, states
        report: run_dir
    """
    if target == "orbit":
        p = options.get("p") or config.potential.p
        q = options.get("q") or config.potential.q
        orbit = make_orbit(
            p, q, options["energy"], options.get("eta", 0.5), options.get("phi", 0.0),
            options.get("samples"), omega0=config.potential.omega_y / q,
        )
        name = output.name if output else f"orbit_{p}_{q}.csv"
        return Exporter(Path(config.output_dir)).export_orbit(orbit, name)

    if target == "oracle":
        bumps = scatter_bumps(config.potential)
        solution = diagonalize_truncated(options["e_cut"], bumps, config.potential)
        path = Exporter(Path(config.output_dir)).path(output.name if output else "oracle.csv")
        solution.to_csv(path, options.get("states"))
        logger.info(f"Oracle: {len(solution.basis)} basis modes, lowest energy {solution.energies[0]:.6f}")
        return path

    if target == "report":
        run_dir = Path(options.get("run_dir") or config.output_dir)
        metadata_path = run_dir / METADATA_NAME
        if not metadata_path.exists():
            raise FileNotFoundError(f"no {METADATA_NAME} in {run_dir}")
        with open(metadata_path, 'r', encoding='utf-8') as f:
            metadata = json.load(f)
        analysis_path = run_dir / ANALYSIS_NAME
        if analysis_path.exists():
            with open(analysis_path, 'r', encoding='utf-8') as f:
                metadata['analysis'] = json.load(f)
        reports = None
        reports_path = run_dir / "scar_reports.csv"
        if reports_path.exists():
            with open(reports_path, 'r', newline='', encoding='utf-8') as f:
                reports = list(csv.DictReader(f))
        return Exporter(run_dir).export_report_pdf(metadata, reports, output.name if output else "report.pdf")

    raise ConfigError(f"unknown export target {target!r}; use orbit, oracle or report")
