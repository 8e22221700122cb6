import json
import subprocess
import sys

import pytest

from orcasim.cli import main
from orcasim.errors import ConfigError
from orcasim.scenarios import PRESETS, list_presets, load_config, preset_document, run_scenario


@pytest.fixture(scope="module")
def preset_runs(tmp_path_factory):
    cache = {}

    def run(name):
        if name not in cache:
            out = tmp_path_factory.mktemp(name)
            cache[name] = run_scenario(load_config(preset_document(name)), out)["results"], out
        return cache[name]

    return run


# --- presets and validation ----------------------------------------------------------

def test_at_least_nine_presets():
    names = [n for n, _ in list_presets()]
    assert len(names) >= 9
    assert {"fig3", "figS4a", "figS4b", "figS4c", "figS5", "lifetime", "detuning", "lossbudget",
            "g2hbt"} <= set(names)


@pytest.mark.parametrize("name", list(PRESETS))
def test_every_preset_validates(name):
    assert load_config(preset_document(name)).name == name


@pytest.mark.parametrize("path,value", [
    ("memory.optical_depth", -1.0),
    ("control.readout_energy_scale", 0.0),
    ("etalon.placement", "inside"),
    ("detector.efficiency", 1.5),
    ("grid.grid_points", 2),
    ("source.g2_zero", -0.2),
    ("acquisition.time_s", "long"),
])
def test_invalid_field_is_named(path, value):
    doc = preset_document("fig3")
    node = doc
    *parents, leaf = path.split(".")
    for key in parents:
        node = node[key]
    node[leaf] = value
    with pytest.raises(ConfigError) as info:
        load_config(doc)
    assert info.value.field.split(".")[0] == parents[0]


def test_missing_field_is_named():
    doc = preset_document("fig3")
    del doc["signal"]["fwhm_ps"]
    with pytest.raises(ConfigError, match="signal.fwhm_ps"):
        load_config(doc)


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset_document("fig99")


# --- runs -------------------------------------------------------------------------------

def test_lossbudget_preset(preset_runs):
    res, _ = preset_runs("lossbudget")
    assert res["total"] == pytest.approx(0.153, abs=0.002)
    assert res["uncertainty"] == pytest.approx(0.009, rel=0.2)


def test_byte_identical_reports(tmp_path):
    cfg = load_config(preset_document("lossbudget"))
    run_scenario(cfg, tmp_path / "a")
    run_scenario(cfg, tmp_path / "b")
    assert (tmp_path / "a/report.json").read_bytes() == (tmp_path / "b/report.json").read_bytes()


def test_memory_run_deterministic(tmp_path):
    doc = preset_document("fig3")
    doc["grid"] = {"grid_points": 32, "velocity_classes": 16, "time_steps": 4000}
    doc["acquisition"]["time_s"] = 60.0
    cfg = load_config(doc)
    run_scenario(cfg, tmp_path / "a")
    run_scenario(cfg, tmp_path / "b")
    for f in ("report.json", "histogram_memory.csv", "histogram_memory.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_report_has_provenance(preset_runs):
    _, out = preset_runs("lossbudget")
    rep = json.loads((out / "report.json").read_text())
    prov = rep["provenance"]
    assert len(prov["config_sha256"]) == 64 and prov["seed"] == 1
    assert {"orcasim", "numpy", "scipy", "numba"} <= set(prov["versions"])
    assert "time" not in json.dumps(prov)


def test_fig3_read_in(preset_runs):
    res, out = preset_runs("fig3")
    assert res["report"]["eta_in"] == pytest.approx(0.493, abs=0.02)
    assert res["pipeline"]["detected_input_rate_hz"] == pytest.approx(203.4, rel=1e-9)
    for s in ("signal", "memory", "noise"):
        assert (out / f"histogram_{s}.csv").exists()


def test_fig3_total_efficiency(preset_runs):
    res, _ = preset_runs("fig3")
    assert res["report"]["eta_tot"] == pytest.approx(0.129, rel=0.25)


def test_fig3_snr(preset_runs):
    res, _ = preset_runs("fig3")
    assert res["report"]["snr"] == pytest.approx(18.2, rel=0.25)


def test_figS4a_no_filter(preset_runs):
    res, _ = preset_runs("figS4a")
    assert res["inhomogeneous"]["eta_in"] == pytest.approx(0.102, abs=0.01)
    assert res["inhomogeneous"]["eta_tot"] == pytest.approx(0.010, rel=0.25)


def test_figS4b_etalon_before(preset_runs):
    res, _ = preset_runs("figS4b")
    assert res["inhomogeneous"]["eta_in"] == pytest.approx(0.434, abs=0.02)
    assert res["inhomogeneous"]["eta_tot"] == pytest.approx(0.089, rel=0.25)
    assert res["report"]["snr"] == pytest.approx(1.73, rel=0.25)


def test_etalon_placement_ordering(preset_runs):
    a, _ = preset_runs("figS4a")
    b, _ = preset_runs("figS4b")
    # filtering the broad line raises the read-in efficiency; only "after" filters the noise
    assert b["inhomogeneous"]["eta_in"] > a["inhomogeneous"]["eta_in"]
    assert b["pipeline"]["noise_photons_per_pulse"] == a["pipeline"]["noise_photons_per_pulse"]


def test_window_sweep_preset(preset_runs):
    res, out = preset_runs("figS5")
    sw = res["window_sweep"]
    assert all(b >= a for a, b in zip(sw["retrieved_rate_per_s"], sw["retrieved_rate_per_s"][1:]))
    assert (out / "window_sweep.csv").exists()


def test_g2hbt_preset(preset_runs):
    res, _ = preset_runs("g2hbt")
    assert res["g2"] == pytest.approx(0.325, abs=3 * res["g2_stderr"])


# --- command line -----------------------------------------------------------------------------

def test_cli_list_presets(capsys):
    assert main(["list-presets"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) >= 9


def test_cli_validate_file(tmp_path, capsys):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(preset_document("lossbudget")))
    assert main(["validate", str(path)]) == 0
    assert "valid" in capsys.readouterr().out


def test_cli_run_with_overrides(tmp_path):
    assert main(["run", "lossbudget", "--seed", "7", "--out-dir", str(tmp_path),
                 "--grid-points", "32", "--velocity-classes", "8"]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["provenance"]["seed"] == 7
    assert rep["config"]["grid"]["grid_points"] == 32


@pytest.mark.parametrize("argv", [["validate", "no-such-file.json"], ["run", "fig99"]])
def test_cli_errors_exit_nonzero(argv, capsys):
    assert main(argv) != 0
    assert "error" in capsys.readouterr().err


def test_cli_invalid_json(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["validate", str(bad)]) != 0


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "orcasim", "list-presets"], capture_output=True,
                         text=True, check=False)
    assert out.returncode == 0 and "fig3" in out.stdout
    bad = subprocess.run([sys.executable, "-m", "orcasim", "run", "fig99"], capture_output=True,
                         text=True, check=False)
    assert bad.returncode != 0
