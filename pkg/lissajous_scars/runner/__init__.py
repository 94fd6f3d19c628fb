"""Subcommand orchestration: solve, analyze, scan and export."""

from .pipeline import (
    SolveOutcome, AnalyzeOutcome, ScanOutcome, cmd_solve, cmd_analyze, cmd_scan, cmd_export,
)

__all__ = [
    "SolveOutcome", "AnalyzeOutcome", "ScanOutcome", "cmd_solve", "cmd_analyze", "cmd_scan", "cmd_export",
]
