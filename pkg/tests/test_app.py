import csv
import json

import numpy as np
import pytest

from lissajous_scars.app import EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main
from lissajous_scars.lattice import GridSpec
from lissajous_scars.oracle import HgIndex, hg_mode
from lissajous_scars.potential import PotentialConfig
from lissajous_scars.reports import WavefunctionArchive
from lissajous_scars.runner.pipeline import run_points

SMALL_RUN = {
    "potential.p": 1,
    "potential.q": 2,
    "potential.amplitude": 0.0,
    "potential.density": 0.0,
    "grid.extent_x": 11.0,
    "grid.extent_y": 7.0,
    "grid.points_x": 80,
    "grid.points_y": 48,
    "itp.k": 4,
}


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(SMALL_RUN))
    return path


@pytest.fixture
def ground_archive(tmp_path):
    grid = GridSpec(11.0, 7.0, 80, 48)
    cfg = PotentialConfig(p=1, q=2, amplitude=0.0)
    states = [hg_mode(HgIndex(0, 0), grid, cfg), hg_mode(HgIndex(1, 0), grid, cfg)]
    return WavefunctionArchive.from_states(states).write(tmp_path / "archive" / "states.qlsc")


class TestSolve:
    def test_writes_archive_and_metadata(self, tmp_path, config_file):
        out = tmp_path / "run"

        assert main(["solve", "--config", str(config_file), "--output", str(out)]) == EXIT_OK

        metadata = json.loads((out / "metadata.json").read_text())
        np.testing.assert_allclose(metadata["solve"]["energies"], [1.5, 2.5, 3.5, 3.5], atol=1e-4)
        assert metadata["solve"]["all_converged"] is True
        assert metadata["seed"] == 0
        assert metadata["config"]["itp.k"] == 4
        assert "partial" not in metadata
        assert (out / "bumps.csv").exists()
        archive = WavefunctionArchive.read(out / "states.qlsc")
        assert len(archive) == 4

    def test_same_config_gives_identical_archives(self, tmp_path, config_file):
        for name in ("a", "b"):
            assert main(["solve", "--config", str(config_file), "--output", str(tmp_path / name)]) == EXIT_OK

        first = (tmp_path / "a" / "states.qlsc").read_bytes()
        assert first == (tmp_path / "b" / "states.qlsc").read_bytes()

    def test_unconverged_run_is_a_numerical_failure(self, tmp_path, config_file):
        out = tmp_path / "run"

        status = main(["solve", "--config", str(config_file), "--output", str(out),
                       "--set", "itp.max_iterations=1"])

        assert status == EXIT_NUMERICAL
        assert json.loads((out / "metadata.json").read_text())["partial"] is True
        assert (out / "states.qlsc").exists()


class TestUsage:
    def test_missing_config_file(self, tmp_path):
        assert main(["solve", "--config", str(tmp_path / "absent.json")]) == EXIT_USAGE

    def test_config_directory_is_an_io_error(self, tmp_path):
        assert main(["solve", "--config", str(tmp_path)]) == EXIT_IO

    def test_unknown_override(self, tmp_path, config_file):
        assert main(["solve", "--config", str(config_file), "--set", "itp.bogus=1"]) == EXIT_USAGE

    @pytest.mark.parametrize("argv", [[], ["bogus"], ["scan", "sideways"], ["analyze"]])
    def test_bad_arguments_exit_with_usage_status(self, argv):
        with pytest.raises(SystemExit) as excinfo:
            main(argv)
        assert excinfo.value.code == EXIT_USAGE

    def test_missing_archive_is_an_io_error(self, tmp_path, config_file):
        status = main(["analyze", str(tmp_path / "absent.qlsc"), "--config", str(config_file),
                       "--output", str(tmp_path / "out")])

        assert status == EXIT_IO

    def test_corrupt_archive_is_an_io_error(self, tmp_path, config_file):
        bad = tmp_path / "bad.qlsc"
        bad.write_bytes(b"QLSC1" + bytes(10))

        status = main(["analyze", str(bad), "--config", str(config_file), "--output", str(tmp_path / "out")])

        assert status == EXIT_IO


class TestAnalyze:
    def test_alpha_only_without_candidates(self, tmp_path, config_file, ground_archive):
        out = tmp_path / "analysis"

        status = main(["analyze", str(ground_archive), "--config", str(config_file), "--output", str(out),
                       "--set", "analysis.candidates=[]", "--image", "0"])

        assert status == EXIT_OK
        rows = read_rows(out / "scar_reports.csv")
        assert [r["s"] for r in rows] == ["", ""]
        alpha = read_rows(out / "alpha.csv")
        assert float(alpha[0]["alpha"]) == pytest.approx(3.0 / (2.0 * 2.0 ** 0.5), rel=1e-8)
        summary = json.loads((out / "analysis.json").read_text())
        assert summary["fraction"] is None
        assert summary["states"] == 2

        image = (out / "density_0000.pgm").read_bytes()
        header = b"P5\n80 48\n65535\n"
        pixels = np.frombuffer(image[len(header):], dtype=">u2").reshape(48, 80)
        assert np.unravel_index(pixels.argmax(), pixels.shape) == (24, 40)
        assert not (out / "orbit_0000.csv").exists()

    def test_survey_with_templates(self, tmp_path, config_file, ground_archive):
        out = tmp_path / "analysis"

        status = main(["analyze", str(ground_archive), "--config", str(config_file), "--output", str(out),
                       "--set", "analysis.n_eta=1", "--set", "analysis.n_phi=4"])

        assert status == EXIT_OK
        rows = read_rows(out / "scar_reports.csv")
        assert all(float(r["s"]) >= 0 for r in rows)
        assert {r["p"] for r in rows} == {"1"}
        assert (out / "dos.csv").exists()
        summary = json.loads((out / "analysis.json").read_text())
        # Unperturbed modes never beat their own baseline
        assert summary["fraction"] == 0.0
        assert 0.0 <= summary["raw_fraction"] <= 1.0
        assert 0.0 <= summary["baseline_fraction"] <= 1.0
        assert summary["baseline_margin"] == 1.0
        assert all(float(r["baseline"]) > 0 for r in rows)


class TestScan:
    def test_analytic_ratio_scan(self, tmp_path, config_file):
        out = tmp_path / "scan"

        status = main(["scan", "ratio", "--values", "0.5,1.0", "--config", str(config_file),
                       "--output", str(out)])

        assert status == EXIT_OK
        weights = read_rows(out / "dos_weights.csv")
        assert [float(r["ratio"]) for r in weights] == [0.5, 1.0]
        np.testing.assert_allclose([float(r["max_weight"]) for r in weights], [10.0, 20.0], rtol=1e-9)
        assert (out / "dos_matrix.csv").exists()
        assert json.loads((out / "scan_ratio.json").read_text())["failures"] == {}

    def test_deviation_scan_needs_zero(self, tmp_path, config_file):
        status = main(["scan", "deviation", "--values", "0.01,0.02", "--config", str(config_file),
                       "--output", str(tmp_path / "scan")])

        assert status == EXIT_USAGE

    @pytest.mark.slow
    def test_deviation_scan_table(self, tmp_path, config_file):
        out = tmp_path / "scan"

        status = main(["scan", "deviation", "--values", "0,0.01", "--config", str(config_file),
                       "--output", str(out), "--set", "analysis.n_eta=3", "--set", "analysis.n_phi=8"])

        assert status == EXIT_OK
        rows = read_rows(out / "deviation.csv")
        assert [float(r["delta"]) for r in rows] == [0.0, 0.01]


def test_run_points_records_failures():
    def job(point):
        if point == 2.0:
            raise ValueError("diverged")
        return point * 10

    results, failures = run_points([1.0, 2.0, 3.0], job, workers=3)

    assert results == {1.0: 10.0, 3.0: 30.0}
    assert failures == {2.0: "ValueError: diverged"}


class TestExport:
    def test_orbit(self, tmp_path, config_file):
        out = tmp_path / "export"

        status = main(["export", "orbit", "--energy", "2.0", "--phi", "0.3", "--config", str(config_file),
                       "--output", str(out)])

        assert status == EXIT_OK
        rows = read_rows(out / "orbit_1_2.csv")
        assert len(rows) == 129
        assert max(abs(float(r["x"])) for r in rows) <= 2.0 ** 0.5

    def test_orbit_needs_energy(self, tmp_path, config_file):
        assert main(["export", "orbit", "--config", str(config_file), "--output", str(tmp_path)]) == EXIT_USAGE

    def test_non_coprime_orbit(self, tmp_path, config_file):
        status = main(["export", "orbit", "--p", "2", "--q", "4", "--energy", "1", "--config", str(config_file),
                       "--output", str(tmp_path)])

        assert status == EXIT_USAGE

    def test_oracle(self, tmp_path, config_file):
        out = tmp_path / "export"

        status = main(["export", "oracle", "--e-cut", "5.5", "--states", "1", "--config", str(config_file),
                       "--output", str(out)])

        assert status == EXIT_OK
        rows = read_rows(out / "oracle.csv")
        assert len(rows) == 9
        assert {r["state"] for r in rows} == {"0"}

    def test_report(self, tmp_path, config_file):
        pytest.importorskip("reportlab")
        run = tmp_path / "run"
        assert main(["solve", "--config", str(config_file), "--output", str(run)]) == EXIT_OK

        status = main(["export", "report", "--run-dir", str(run), "--config", str(config_file)])

        assert status == EXIT_OK
        assert (run / "report.pdf").read_bytes().startswith(b"%PDF")

    def test_report_after_alpha_only_analysis(self, tmp_path, config_file):
        pytest.importorskip("reportlab")
        run = tmp_path / "run"
        assert main(["solve", "--config", str(config_file), "--output", str(run)]) == EXIT_OK
        assert main(["analyze", str(run / "states.qlsc"), "--config", str(config_file), "--output", str(run),
                     "--set", "analysis.candidates=[]"]) == EXIT_OK
        assert json.loads((run / "analysis.json").read_text())["fraction"] is None

        status = main(["export", "report", "--run-dir", str(run), "--config", str(config_file)])

        assert status == EXIT_OK
        assert (run / "report.pdf").read_bytes().startswith(b"%PDF")

    def test_report_without_run(self, tmp_path, config_file):
        status = main(["export", "report", "--run-dir", str(tmp_path / "empty"), "--config", str(config_file)])

        assert status == EXIT_IO


PERTURBED_RUN = {
    "potential.p": 1,
    "potential.q": 2,
    "potential.amplitude": 4.0,
    "potential.density": 2.0,
    "potential.seed": 7,
}


def non_increasing_by_detuning(rows, column, inversions=1):
    """Each side of delta = 0, ordered by |delta|, may rise at most ``inversions`` times."""
    for side in (lambda d: d >= 0, lambda d: d <= 0):
        values = [float(r[column]) for r in sorted(rows, key=lambda r: abs(float(r["delta"])))
                  if side(float(r["delta"]))]
        if sum(1 for a, b in zip(values, values[1:]) if b > a) > inversions:
            return False
    return True


@pytest.mark.slow
def test_perturbed_census_scars_above_the_unperturbed_floor(tmp_path):
    config = tmp_path / "census.json"
    config.write_text(json.dumps({**PERTURBED_RUN, "itp.k": 300}))
    run = tmp_path / "run"

    assert main(["solve", "--config", str(config), "--output", str(run)]) == EXIT_OK
    assert main(["analyze", str(run / "states.qlsc"), "--config", str(config), "--output", str(run)]) == EXIT_OK

    summary = json.loads((run / "analysis.json").read_text())
    assert 0.05 <= summary["fraction"] <= 0.70
    # Unperturbed product modes are never flagged, so any scar is above that floor
    assert summary["fraction"] > 0.0
    rows = read_rows(run / "scar_reports.csv")
    assert any(r["flag"] == "1" and (r["p"], r["q"]) == ("1", "2") and r["kind"] == "loop" and float(r["s"]) >= 2.0
               for r in rows)


@pytest.mark.slow
def test_scarring_weakens_with_detuning(tmp_path):
    config = tmp_path / "scan.json"
    config.write_text(json.dumps({**PERTURBED_RUN, "itp.k": 100, "analysis.n_scars": 5}))
    out = tmp_path / "scan"

    status = main(["scan", "deviation", "--values", "-0.01,-0.005,-0.002,0,0.002,0.005,0.01",
                   "--config", str(config), "--output", str(out)])

    assert status == EXIT_OK
    rows = read_rows(out / "deviation.csv")
    assert len(rows) == 7
    assert non_increasing_by_detuning(rows, "ratio")
    assert non_increasing_by_detuning(rows, "count")
