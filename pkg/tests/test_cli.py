"""End-to-end tests of the command-line pipeline."""

import json
import math
import shutil

import numpy as np
import pytest

from spinbath.analysis import SamplePoint, write_sample_csv
from spinbath.cli import main
from spinbath.decoherence import DecayCurve, OuNoiseModel, PulseSequence, \
    single_nv_signal
from spinbath.lattice import BathConfiguration


@pytest.fixture(scope="module")
def sweep_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep_run")
    rc = main(["sweep", "--ppm", "100", "--n", "100", "--target-spins",
               "200", "--seed", "11", "--out", str(out)])
    assert rc == 0
    return out


def test_sweep_outputs(sweep_dir):
    for name in ("realizations_100ppm.csv", "sweep.csv", "sweep.json",
                 "manifest.json"):
        assert (sweep_dir / name).exists()
    payload = json.loads((sweep_dir / "sweep.json").read_text())
    assert len(payload["rows"]) == 1
    row = payload["rows"][0]
    assert row["concentration_ppm"] == 100.0
    assert row["n_realizations"] == 100
    assert payload["config"]["tau_fit"] == "median"
    lines = (sweep_dir / "realizations_100ppm.csv").read_text().splitlines()
    assert len(lines) == 101
    manifest = json.loads((sweep_dir / "manifest.json").read_text())
    assert manifest["command"] == "sweep"
    assert "sweep.csv" in manifest["files"]
    assert len(manifest["files"]["sweep.csv"]) == 64


def test_sweep_worker_count_does_not_change_results(sweep_dir, tmp_path,
                                                    monkeypatch):
    monkeypatch.setenv("SPINBATH_WORKERS", "2")
    rc = main(["sweep", "--ppm", "100", "--n", "100", "--target-spins",
               "200", "--seed", "11", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "sweep.csv").read_bytes() \
        == (sweep_dir / "sweep.csv").read_bytes()
    assert (tmp_path / "realizations_100ppm.csv").read_bytes() \
        == (sweep_dir / "realizations_100ppm.csv").read_bytes()


def test_report_outputs(sweep_dir, tmp_path):
    run = tmp_path / "run"
    shutil.copytree(sweep_dir, run)
    rc = main(["report", "--run", str(run)])
    assert rc == 0
    report = json.loads((run / "report.json").read_text())
    assert report["representative_ppm"] == 100.0
    assert "ratio" in report and "stretch_exponents" in report
    text = (run / "report.md").read_text()
    assert text.startswith("# Spin-bath sweep report")
    for name in ("scaling_recipe.json", "scaling.png",
                 "distributions_recipe.json", "distributions.png"):
        assert (run / name).exists(), name
    assert (run / "scaling.png").stat().st_size > 1000
    recipe = json.loads((run / "distributions_recipe.json").read_text())
    assert recipe  # parseable, non-empty
    manifest = json.loads((run / "manifest.json").read_text())
    assert manifest["command"] == "report"


def test_report_no_figures(sweep_dir, tmp_path):
    run = tmp_path / "run"
    shutil.copytree(sweep_dir, run)
    rc = main(["report", "--run", str(run), "--no-figures", "--format",
               "json"])
    assert rc == 0
    assert (run / "report.json").exists()
    assert not (run / "report.md").exists()
    assert not (run / "scaling.png").exists()


def test_gen_bath(tmp_path):
    rc = main(["gen-bath", "--ppm", "100", "--n", "3", "--seed", "5",
               "--target-spins", "100", "--out", str(tmp_path)])
    assert rc == 0
    for index in range(3):
        path = tmp_path / f"bath_{index:04d}.json"
        config = BathConfiguration.from_json(path.read_text())
        assert config.positions_nm.shape[0] > 10
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["ppm"] == 100.0
    assert len(manifest["files"]) == 3


def test_decay_single_and_ensemble(tmp_path):
    rc = main(["decay", "--single", "--delta", "1e5", "--tau-c", "1e-3",
               "--sequence", "fid", "--out", str(tmp_path)])
    assert rc == 0
    curve = DecayCurve.from_csv(tmp_path / "decay_single_fid.csv")
    assert curve.kind == "probability"
    assert curve.sequence is PulseSequence.RAMSEY
    assert curve.values[0] == 1.0

    rc = main(["decay", "--delta", "2e5", "--tau-c", "1e-3", "--sequence",
               "echo", "--points", "12", "--out", str(tmp_path)])
    assert rc == 0
    echo = DecayCurve.from_csv(tmp_path / "decay_echo.csv")
    assert echo.sequence is PulseSequence.SPIN_ECHO
    assert echo.reference is not None
    assert echo.times.size == 12


def test_decay_from_sweep_stats(sweep_dir, tmp_path):
    rc = main(["decay", "--stats", str(sweep_dir / "sweep.json"), "--ppm",
               "100", "--sequence", "fid", "--out", str(tmp_path)])
    assert rc == 0
    curve = DecayCurve.from_csv(tmp_path / "decay_fid.csv")
    row = json.loads((sweep_dir / "sweep.json").read_text())["rows"][0]
    assert curve.metadata["delta_ens_rad_s"] == row["delta_ens_rad_s"]


def test_fit_curve(tmp_path):
    model = OuNoiseModel(delta=2e5, tau_c=1.0)
    times = np.linspace(0.0, 3.0 * model.t2_star, 50)
    curve_path = tmp_path / "curve.csv"
    single_nv_signal(PulseSequence.RAMSEY, times, model).to_csv(curve_path)
    rc = main(["fit", "--input", str(curve_path), "--out", str(tmp_path)])
    assert rc == 0
    result = json.loads((tmp_path / "fit.json").read_text())
    assert result["kind"] == "stretched_exponential"
    assert result["p"] == pytest.approx(2.0, abs=0.05)
    assert result["converged"]


def test_fit_samples(tmp_path):
    rate_star = 2.0 * math.pi * 16.0e3
    rate_echo = 1.0 / 160e-6
    t_other = 694e-6
    points = []
    for c in (1.0, 3.0, 10.0, 30.0, 100.0):
        points.append(SamplePoint(concentration_ppm=c,
                                  t_seconds=1.0 / (rate_star * c),
                                  measurement="t2star"))
        points.append(SamplePoint(
            concentration_ppm=c,
            t_seconds=1.0 / (rate_echo * c + 1.0 / t_other),
            measurement="t2"))
    # one double-quantum point measured at half the single-quantum time
    points.append(SamplePoint(concentration_ppm=50.0,
                              t_seconds=0.5 / (rate_star * 50.0),
                              measurement="t2star", basis="double_quantum"))
    path = tmp_path / "samples.csv"
    write_sample_csv(path, points)
    rc = main(["fit", "--input", str(path), "--out", str(tmp_path)])
    assert rc == 0
    result = json.loads((tmp_path / "fit.json").read_text())
    assert result["basis_corrected"] == 1
    assert result["t2star"]["inverse_rate_us_ppm"] == pytest.approx(9.9472,
                                                                    abs=1e-3)
    assert result["t2star"]["n_points"] == 6
    assert result["t2"]["t_other_s"] == pytest.approx(t_other, rel=1e-6)


def test_exit_codes(tmp_path):
    assert main(["fit", "--input", str(tmp_path / "missing.csv"),
                 "--out", str(tmp_path)]) == 3
    assert main(["sweep", "--ppm", "abc", "--out", str(tmp_path)]) == 2
    assert main(["sweep", "--ppm", "", "--out", str(tmp_path)]) == 2
    assert main(["report", "--run", str(tmp_path / "nope")]) == 3
    assert main(["gen-bath", "--ppm", "0.1", "--half-width-nm", "2",
                 "--n", "1", "--out", str(tmp_path)]) == 4
    assert main(["sweep", "--config", str(tmp_path / "absent.ini"),
                 "--out", str(tmp_path)]) == 3
    assert main(["decay", "--out", str(tmp_path)]) == 3


def test_gen_bath_warns_outside_studied_range(tmp_path):
    with pytest.warns(UserWarning):
        rc = main(["gen-bath", "--ppm", "2000", "--half-width-nm", "4",
                   "--n", "1", "--out", str(tmp_path)])
    assert rc == 0


def test_exclusion_scan(tmp_path):
    rc = main(["exclusion-scan", "--ppm", "100", "--n", "100",
               "--fractions", "0.5,1", "--target-spins", "150",
               "--seed", "2", "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "exclusion_scan.csv").read_text().splitlines()
    assert lines[0].startswith("exclusion_fraction,")
    assert len(lines) == 3
    fractions = [float(line.split(",")[0]) for line in lines[1:]]
    assert fractions == [0.5, 1.0]


def test_config_file_and_flag_precedence(tmp_path):
    cfg_out = tmp_path / "from_config"
    ini = tmp_path / "run.ini"
    ini.write_text("[run]\nn_realizations = 2\nmaster_seed = 4\n"
                   f"target_spins = 120\nout_dir = {cfg_out}\n")
    rc = main(["gen-bath", "--ppm", "50", "--config", str(ini)])
    assert rc == 0
    manifest = json.loads((cfg_out / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 4
    assert len(manifest["files"]) == 2

    other = tmp_path / "flag_wins"
    rc = main(["gen-bath", "--ppm", "50", "--config", str(ini),
               "--seed", "9", "--out", str(other)])
    assert rc == 0
    manifest = json.loads((other / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 9

    bad = tmp_path / "bad.ini"
    bad.write_text("[other]\nn_realizations = 2\n")
    assert main(["gen-bath", "--ppm", "50", "--config", str(bad),
                 "--out", str(tmp_path)]) == 3
