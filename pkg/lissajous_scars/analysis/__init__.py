"""Post-processing: density of states, localization and scar detection."""

from .spectrum import (
    DosCurve, DosMatrix, SpectrumSource, dos, dos_ratio_scan, degeneracy_weight, level_spacing_ratios,
    mean_spacing_ratio,
)
from .localization import alpha_value, alpha_values
from .scars import (
    ScarReport, SurveyResult, DeviationRow, TemplateBank, scar_measure, scar_survey, deviation_scan,
    default_tube_width, unperturbed_census,
)

__all__ = [
    "DosCurve", "DosMatrix", "SpectrumSource", "dos", "dos_ratio_scan", "degeneracy_weight",
    "level_spacing_ratios", "mean_spacing_ratio",
    "alpha_value", "alpha_values",
    "ScarReport", "SurveyResult", "DeviationRow", "TemplateBank", "scar_measure", "scar_survey",
    "deviation_scan", "default_tube_width", "unperturbed_census",
]
