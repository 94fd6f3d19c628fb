"""Run configuration: a flat JSON document with dotted keys."""

import json
import logging
from dataclasses import dataclass, field, fields, asdict, replace
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple

from ..errors import ConfigError
from ..lattice.grid import GridSpec, default_grid
from ..oracle.hermite import enumerate_modes, unperturbed_energy
from ..potential.confinement import PotentialConfig
from ..solver.itp import ItpConfig

logger = logging.getLogger("LissajousScars.runner")

DEFAULT_DELTAS = (-0.01, -0.005, -0.002, 0.0, 0.002, 0.005, 0.01)
DEFAULT_RATIOS = tuple(round(0.2 + 0.05 * i, 2) for i in range(17))

# Headroom above the k-th unperturbed level when sizing the default grid
E_MAX_HEADROOM = 1.25


@dataclass(frozen=True)
class GridSettings:
    """Explicit grid (all four of extent_x, extent_y, points_x, points_y) or an e_max for the default grid."""

    e_max: Optional[float] = None
    extent_x: Optional[float] = None
    extent_y: Optional[float] = None
    points_x: Optional[int] = None
    points_y: Optional[int] = None

    def __post_init__(self):
        explicit = [self.extent_x, self.extent_y, self.points_x, self.points_y]
        if any(v is not None for v in explicit) and not all(v is not None for v in explicit):
            raise ConfigError("grid.extent_x, extent_y, points_x and points_y must be given together")
        if self.e_max is not None and not self.e_max > 0:
            raise ConfigError(f"grid.e_max must be positive, got {self.e_max!r}")

    def resolve(self, potential: PotentialConfig, k: int) -> GridSpec:
        if self.points_x is not None:
            return GridSpec(self.extent_x, self.extent_y, self.points_x, self.points_y)
        e_max = self.e_max if self.e_max is not None else estimate_e_max(potential, k)
        return default_grid(potential, e_max)


def estimate_e_max(cfg: PotentialConfig, k: int) -> float:
    """Energy comfortably above the k lowest levels of the bumpy oscillator."""
    e_cut = cfg.omega_x + cfg.omega_y
    while True:
        modes = enumerate_modes(e_cut, cfg)
        if len(modes) >= k:
            break
        e_cut *= 1.5
    kth = unperturbed_energy(modes[k - 1], cfg)
    return E_MAX_HEADROOM * kth + cfg.amplitude


@dataclass(frozen=True)
class AnalysisSettings:
    """Scar detection, DOS and scan parameters.

    ``candidates`` None means the (p, q) of the potential; an empty list
    turns scar detection off and leaves only alpha in the reports.
    """

    threshold: float = 2.0
    baseline_margin: float = 1.0
    tube_width: Optional[float] = None
    n_eta: int = 9
    n_phi: int = 32
    samples_per_period: Optional[int] = None
    candidates: Optional[Tuple[Tuple[int, int], ...]] = None
    dos_window: float = 0.001
    n_scars: int = 30
    deltas: Tuple[float, ...] = DEFAULT_DELTAS
    ratios: Tuple[float, ...] = DEFAULT_RATIOS
    scan_e_max: float = 20.0
    scan_workers: int = 1
    export_images: bool = True

    def __post_init__(self):
        if self.candidates is not None:
            try:
                candidates = tuple((int(p), int(q)) for p, q in self.candidates)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"analysis.candidates must be a list of [p, q] pairs: {e}") from e
            object.__setattr__(self, "candidates", candidates)
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        if not self.threshold > 0:
            raise ConfigError(f"analysis.threshold must be positive, got {self.threshold!r}")
        if not self.baseline_margin >= 0:
            raise ConfigError(f"analysis.baseline_margin must be >= 0, got {self.baseline_margin!r}")
        if self.tube_width is not None and not self.tube_width > 0:
            raise ConfigError(f"analysis.tube_width must be positive, got {self.tube_width!r}")
        if self.n_eta < 1 or self.n_phi < 1:
            raise ConfigError("analysis.n_eta and analysis.n_phi must be >= 1")
        if not self.dos_window > 0:
            raise ConfigError(f"analysis.dos_window must be positive, got {self.dos_window!r}")
        if self.n_scars < 1:
            raise ConfigError(f"analysis.n_scars must be >= 1, got {self.n_scars!r}")
        if self.scan_workers < 1:
            raise ConfigError(f"analysis.scan_workers must be >= 1, got {self.scan_workers!r}")

    def candidate_pairs(self, potential: PotentialConfig) -> Tuple[Tuple[int, int], ...]:
        if self.candidates is None:
            return ((potential.p, potential.q),)
        return self.candidates


_SECTIONS = {
    "potential": PotentialConfig,
    "grid": GridSettings,
    "itp": ItpConfig,
    "analysis": AnalysisSettings,
}


def _jsonable(value):
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    return value


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs. Serializes to flat keys such as ``itp.tolerance``."""

    potential: PotentialConfig = field(default_factory=PotentialConfig)
    grid: GridSettings = field(default_factory=GridSettings)
    itp: ItpConfig = field(default_factory=ItpConfig)
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)
    output_dir: str = "runs"

    def to_flat(self) -> Dict:
        flat = {}
        for section in _SECTIONS:
            for key, value in asdict(getattr(self, section)).items():
                flat[f"{section}.{key}"] = _jsonable(value)
        flat["output_dir"] = self.output_dir
        return flat

    @classmethod
    def from_flat(cls, flat: Dict) -> "RunConfig":
        """Build from dotted keys; missing keys take their defaults.

        Raises:
            ConfigError: unknown keys or invalid values
        """
        grouped = {section: {} for section in _SECTIONS}
        output_dir = "runs"
        for key, value in flat.items():
            if key == "output_dir":
                output_dir = str(value)
                continue
            section, _, name = key.partition(".")
            if section not in _SECTIONS or name not in {f.name for f in fields(_SECTIONS[section])}:
                raise ConfigError(f"unknown configuration key {key!r}")
            grouped[section][name] = value

        parts = {}
        for section, kind in _SECTIONS.items():
            try:
                parts[section] = kind(**grouped[section])
            except ConfigError:
                raise
            except (TypeError, ValueError) as e:
                raise ConfigError(f"invalid {section} settings: {e}") from e
        return cls(output_dir=output_dir, **parts)

    @classmethod
    def load(cls, path: Path) -> "RunConfig":
        """Load a configuration file.

        Raises:
            FileNotFoundError: missing file
            ConfigError: malformed JSON, unknown keys or invalid values
        """
        path = Path(path)
        with open(path, 'r', encoding='utf-8') as f:
            try:
                flat = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path} is not valid JSON: {e}") from e
        if not isinstance(flat, dict):
            raise ConfigError(f"{path} must hold a JSON object of dotted keys")
        logger.debug(f"Loaded {len(flat)} configuration keys from {path}")
        return cls.from_flat(flat)

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_flat(), f, indent=2, sort_keys=True)
            f.write("\n")
        return path

    def with_overrides(self, overrides: Iterable[str]) -> "RunConfig":
        """Apply ``key=value`` strings; values parse as JSON, falling back to plain strings."""
        flat = self.to_flat()
        for item in overrides:
            key, sep, raw = item.partition("=")
            if not sep:
                raise ConfigError(f"override {item!r} is not of the form key=value")
            key = key.strip()
            if key not in flat:
                raise ConfigError(f"unknown configuration key {key!r}")
            try:
                flat[key] = json.loads(raw)
            except json.JSONDecodeError:
                flat[key] = raw
        return RunConfig.from_flat(flat)

    def resolve_grid(self) -> GridSpec:
        return self.grid.resolve(self.potential, self.itp.k + self.itp.guard_states)

    def with_potential(self, potential: PotentialConfig) -> "RunConfig":
        return replace(self, potential=potential)
