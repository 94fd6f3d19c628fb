import json

import pytest

from lissajous_scars.errors import ConfigError
from lissajous_scars.lattice import GridSpec, default_grid
from lissajous_scars.potential import PotentialConfig
from lissajous_scars.utils.settings import (
    DEFAULT_RATIOS, AnalysisSettings, GridSettings, RunConfig, estimate_e_max,
)


def test_defaults_round_trip_through_a_file(tmp_path):
    config = RunConfig()

    loaded = RunConfig.load(config.save(tmp_path / "config.json"))

    assert loaded == config


def test_flat_keys_are_dotted():
    flat = RunConfig().to_flat()

    assert flat["itp.tolerance"] == 1e-8
    assert flat["potential.amplitude"] == 4.0
    assert flat["analysis.candidates"] is None
    assert flat["output_dir"] == "runs"
    json.dumps(flat)


def test_missing_keys_take_defaults():
    config = RunConfig.from_flat({"potential.q": 3, "itp.k": 4})

    assert config.potential.q == 3
    assert config.itp.k == 4
    assert config.itp.tolerance == 1e-8


@pytest.mark.parametrize("flat", [
    {"itp.unknown": 1},
    {"solver.k": 1},
    {"itp.k": 0},
    {"potential.p": 0},
    {"analysis.candidates": [[1]]},
    {"grid.extent_x": 5.0},
])
def test_invalid_configuration(flat):
    with pytest.raises(ConfigError):
        RunConfig.from_flat(flat)


def test_malformed_files(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    listing = tmp_path / "list.json"
    listing.write_text("[1, 2]")

    with pytest.raises(ConfigError):
        RunConfig.load(bad)
    with pytest.raises(ConfigError):
        RunConfig.load(listing)
    with pytest.raises(FileNotFoundError):
        RunConfig.load(tmp_path / "absent.json")


def test_overrides_parse_json_values():
    config = RunConfig().with_overrides([
        "itp.k=4",
        "analysis.candidates=[[1, 2], [2, 3]]",
        "output_dir=results",
        "potential.ratio_override=0.502",
    ])

    assert config.itp.k == 4
    assert config.analysis.candidates == ((1, 2), (2, 3))
    assert config.output_dir == "results"
    assert config.potential.ratio == pytest.approx(0.502)


@pytest.mark.parametrize("item", ["itp.k", "nope.k=3", "itp.k=-1"])
def test_bad_overrides(item):
    with pytest.raises(ConfigError):
        RunConfig().with_overrides([item])


class TestGridSettings:
    def test_explicit_grid(self):
        settings = GridSettings(extent_x=5.0, extent_y=4.0, points_x=32, points_y=16)

        assert settings.resolve(PotentialConfig(), 10) == GridSpec(5.0, 4.0, 32, 16)

    def test_energy_driven_grid(self):
        cfg = PotentialConfig(amplitude=0.0)

        assert GridSettings(e_max=12.0).resolve(cfg, 10) == default_grid(cfg, 12.0)

    def test_rejects_nonpositive_e_max(self):
        with pytest.raises(ConfigError):
            GridSettings(e_max=0.0)

    def test_estimate_e_max(self):
        cfg = PotentialConfig(p=1, q=2, amplitude=0.0)

        assert estimate_e_max(cfg, 10) == pytest.approx(1.25 * 6.5)
        assert estimate_e_max(PotentialConfig(p=1, q=2), 10) == pytest.approx(1.25 * 6.5 + 4.0)


class TestAnalysisSettings:
    def test_candidates_default_to_the_potential(self):
        settings = AnalysisSettings()

        assert settings.candidate_pairs(PotentialConfig(p=2, q=3)) == ((2, 3),)
        assert AnalysisSettings(candidates=[]).candidate_pairs(PotentialConfig()) == ()

    def test_default_ratio_grid(self):
        assert DEFAULT_RATIOS[0] == 0.2
        assert DEFAULT_RATIOS[-1] == 1.0
        assert len(DEFAULT_RATIOS) == 17

    @pytest.mark.parametrize("kwargs", [
        {"threshold": 0.0}, {"tube_width": -1.0}, {"n_phi": 0}, {"dos_window": 0.0},
        {"n_scars": 0}, {"scan_workers": 0}, {"baseline_margin": -0.5},
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            AnalysisSettings(**kwargs)
