"""Export run results: CSV tables, graymap images, metadata and PDF reports."""

import csv
import json
import logging
import os
import tempfile
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from ..classical.lissajous import LissajousOrbit
from ..lattice.fields import StateFunction

logger = logging.getLogger("LissajousScars.reports")

PGM_MAXVAL = 65535


@contextmanager
def atomic_write(path: Path, binary: bool = False):
    """Open a temporary file next to ``path`` and rename it into place on success.

    Concurrent writers never observe a partially written ``path``.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        if binary:
            f = os.fdopen(fd, 'wb')
        else:
            f = os.fdopen(fd, 'w', newline='', encoding='utf-8')
        with f:
            yield f
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def _fmt(value) -> str:
    """CSV cell: repr for floats so tables reload exactly, empty for None."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _fraction(value) -> str:
    return "n/a" if value is None else f"{value:.3f}"


def density_graymap(psi: StateFunction) -> bytes:
    """Binary 16-bit PGM of |psi|^2 with the peak density at the maximum level.

    Rows follow the grid's row-major order, so the first image row is
    y = -extent_y. Samples are big-endian as the format requires.
    """
    # Scale to the full 16-bit range; an all-zero state stays black
    rho = psi.density()
    peak = rho.max()
    scaled = np.zeros_like(rho) if peak == 0 else rho / peak
    pixels = np.rint(scaled * PGM_MAXVAL).astype(">u2")
    ny, nx = rho.shape
    return f"P5\n{nx} {ny}\n{PGM_MAXVAL}\n".encode("ascii") + pixels.tobytes()


class Exporter:
    """Writes result files into one run directory."""

    def __init__(self, output_dir: Optional[Path] = None):
        """Initialize exporter.

        Args:
            output_dir: Output directory. Defaults to ./runs
        """
        # Default to ./runs in the working directory
        if output_dir is None:
            output_dir = Path.cwd() / "runs"

        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def write_table(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        """Write a CSV table atomically.

        Args:
            name: File name inside the output directory
            header: Column names
            rows: Row values; floats are written with repr, None as empty

        Returns:
            Path to saved file
        """
        # Written atomically (temp file, then rename)
        filepath = self.path(name)
        with atomic_write(filepath) as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
        logger.debug(f"Wrote {filepath}")
        return filepath

    def export_bumps(self, bumps, name: str = "bumps.csv") -> Path:
        return self.write_table(name, ["index", "x", "y"],
                                ([i, x, y] for i, (x, y) in enumerate(bumps.positions.tolist())))

    def export_scar_reports(self, reports, name: str = "scar_reports.csv") -> Path:
        header = ["index", "E", "alpha", "s", "p", "q", "eta", "phi", "kind", "flag",
                  "bumps_on_orbit", "bump_enhancement", "baseline"]
        rows = ([r.index, r.energy, r.alpha, r.s, r.p, r.q, r.eta, r.phi, r.kind_label,
                 r.strongly_scarred, r.bumps_on_orbit, r.bump_enhancement, r.baseline] for r in reports)
        return self.write_table(name, header, rows)

    def export_alpha(self, reports, name: str = "alpha.csv") -> Path:
        return self.write_table(name, ["index", "E", "alpha"], ([r.index, r.energy, r.alpha] for r in reports))

    def export_dos(self, curve, name: str = "dos.csv") -> Path:
        return self.write_table(name, ["E", "D"], zip(curve.energies.tolist(), curve.values.tolist()))

    def export_dos_matrix(self, matrix, name: str = "dos_matrix.csv") -> Path:
        """Long format: one row per (ratio, E) sample."""
        def rows():
            for ratio, curve in zip(matrix.ratios.tolist(), matrix.curves):
                for e, d in zip(curve.energies.tolist(), curve.values.tolist()):
                    yield [ratio, e, d]
        return self.write_table(name, ["ratio", "E", "D"], rows())

    def export_dos_weights(self, matrix, name: str = "dos_weights.csv") -> Path:
        return self.write_table(name, ["ratio", "max_weight"],
                                zip(matrix.ratios.tolist(), matrix.max_weights().tolist()))

    def export_deviation(self, rows, name: str = "deviation.csv") -> Path:
        return self.write_table(
            name, ["delta", "ratio", "count", "alpha_mean", "n_used", "short"],
            ([r.delta, r.ratio, r.scar_count, r.alpha_mean, r.n_used, r.short] for r in rows),
        )

    def export_density_image(self, psi: StateFunction, name: str) -> Path:
        filepath = self.path(name)
        with atomic_write(filepath, binary=True) as f:
            f.write(density_graymap(psi))
        return filepath

    def export_orbit(self, orbit: LissajousOrbit, name: str) -> Path:
        """Closed polyline t, x, y for overlay on a density image."""
        # Repeat the first point at t = T to close the polyline
        times = list(orbit.times.tolist()) + [orbit.period]
        points = orbit.samples.tolist() + [orbit.samples[0].tolist()]
        return self.write_table(name, ["t", "x", "y"], ([t, x, y] for t, (x, y) in zip(times, points)))

    def export_metadata(self, metadata: Dict, name: str = "metadata.json") -> Path:
        # Sorted keys, two-space indent
        filepath = self.path(name)
        with atomic_write(filepath) as f:
            json.dump(metadata, f, indent=2, sort_keys=True)
            f.write("\n")
        return filepath

    def export_report_pdf(self, metadata: Dict, reports: Optional[List[Dict]] = None,
                          name: str = "report.pdf", timestamp: Optional[datetime] = None) -> Path:
        """Render a run summary to PDF.

        Args:
            metadata: Run metadata as written by ``export_metadata``
            reports: Scar report rows (CSV dictionaries), optional
            name: File name inside the output directory
            timestamp: Report date. Defaults to now

        Returns:
            Path to saved file
        """
        try:
            from reportlab.lib.pagesizes import letter
            from reportlab.lib.styles import getSampleStyleSheet, ParagraphStyle
            from reportlab.lib.units import inch
            from reportlab.platypus import SimpleDocTemplate, Paragraph, Spacer, Table
            from reportlab.lib.enums import TA_CENTER
        except ImportError:
            raise ImportError("reportlab not installed. Install with: pip install reportlab")

        if timestamp is None:
            timestamp = datetime.now()

        # Build into a temp file next to the target, then rename into place
        filepath = self.path(name)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{name}.", suffix=".tmp", dir=self.output_dir)
        os.close(fd)

        # Create PDF document
        doc = SimpleDocTemplate(tmp_name, pagesize=letter)
        story = []
        styles = getSampleStyleSheet()

        # Custom title style
        title_style = ParagraphStyle(
            'CustomTitle',
            parent=styles['Heading1'],
            fontSize=18,
            textColor='#1a1a1a',
            spaceAfter=12,
            alignment=TA_CENTER
        )
        story.append(Paragraph("Lissajous Scars Run Report", title_style))
        story.append(Paragraph(f"Date: {timestamp.strftime('%Y-%m-%d %H:%M:%S')}", styles['Normal']))
        story.append(Spacer(1, 0.3*inch))

        # Configuration table, one row per dotted key
        config = metadata.get('config', {})
        if config:
            story.append(Paragraph("Configuration", styles['Heading2']))
            rows = [[key, json.dumps(value)] for key, value in sorted(config.items())]
            story.append(Table(rows, hAlign='LEFT'))
            story.append(Spacer(1, 0.2*inch))

        # Solver section
        solve = metadata.get('solve', {})
        if solve:
            story.append(Paragraph("Solver", styles['Heading2']))
            energies = solve.get('energies', [])
            residuals = solve.get('residuals', [])
            lines = [
                f"States: {len(energies)}",
                f"Sweeps: {solve.get('iterations', 'n/a')}",
                f"All converged: {solve.get('all_converged', 'n/a')}",
                f"Wall time: {solve.get('seconds', float('nan')):.1f} s",
            ]
            if energies:
                lines.append(f"Energy range: {min(energies):.6f} .. {max(energies):.6f}")
            if residuals:
                lines.append(f"Worst residual: {max(residuals):.3e}")
            for line in lines:
                story.append(Paragraph(f"• {line}", styles['Normal']))
            story.append(Spacer(1, 0.2*inch))

        # Scar survey section (fractions are null when no templates were surveyed)
        analysis = metadata.get('analysis', {})
        if analysis:
            story.append(Paragraph("Scar Survey", styles['Heading2']))
            lines = [
                f"Scarred fraction {_fraction(analysis.get('fraction'))} at threshold "
                f"{analysis.get('threshold', 'n/a')}",
                f"Above threshold before the baseline check: {_fraction(analysis.get('raw_fraction'))}",
                f"Unperturbed-mode baseline fraction: {_fraction(analysis.get('baseline_fraction'))}",
            ]
            for line in lines:
                story.append(Paragraph(f"• {line}", styles['Normal']))
            story.append(Spacer(1, 0.15*inch))

        # Table of strongly scarred states
        if reports:
            flagged = [r for r in reports if r.get('flag') == "1"]
            if flagged:
                story.append(Paragraph("Strongly Scarred States", styles['Heading2']))
                table = [["index", "E", "alpha", "s", "(p,q)", "kind"]]
                for r in flagged:
                    table.append([r['index'], f"{float(r['E']):.4f}", f"{float(r['alpha']):.3f}",
                                  f"{float(r['s']):.2f}", f"({r['p']},{r['q']})", r['kind']])
                story.append(Table(table, hAlign='LEFT'))

        # Build PDF
        try:
            doc.build(story)
            os.replace(tmp_name, filepath)
        finally:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)

        return filepath
