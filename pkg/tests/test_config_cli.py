"""Configuration schema, CLI exit codes, run artifacts and plot-data emission."""

from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hwsnls import cli
from hwsnls.config import DEFAULTS, SUBCOMMANDS, ConfigError, build_config, parse_config
from hwsnls.plotting import PlotDataError, emit_plot_data

PLANE_WAVE = {
    "model": "hw", "n": 1, "p": 3,
    "grid": {"N": 64, "L": 2 * math.pi},
    "stepper": {"dt": 1e-3, "t_end": 1.0, "observe_every": 100, "snapshot_stride": 5},
    "initial": {"preset": "plane_wave", "amplitude": 0.5, "mode": 1},
}
GROUNDSTATE_1D = {"model": "hw", "n": 1, "p": 2, "grid": {"N": 1024, "L": 200}}
INSTABILITY_2D = {
    "model": "hw", "n": 2, "p": 2.5,
    "grid": {"N": 512, "L": 10},
    "stepper": {"dt": 1e-3, "observe_every": 10},
    "experiment": {"lambda": 1.1, "horizon": 1.0},
}


def _write(tmp_path, cfg: dict, name: str = "cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def _run(tmp_path, sub: str, cfg: dict, *extra: str, root: str = "runs") -> tuple[int, object]:
    path = _write(tmp_path, cfg, f"{sub}.json")
    out = tmp_path / root
    code = cli.main([sub, "--config", str(path), "--output-root", str(out), *extra])
    dirs = sorted(out.glob(f"{sub}-*")) if out.exists() else []
    return code, dirs[-1] if dirs else None


# --- schema --------------------------------------------------------------------


def test_minimal_config_fills_defaults_and_hash_is_stable():
    a = parse_config('{"model": "snls", "n": 1, "p": 4}', "simulate")
    b = parse_config('{"p": 4, "n": 1, "model": "snls"}', "simulate")
    assert a.section("grid") == DEFAULTS["grid"]
    assert a.section("stepper")["dt"] == 1e-3
    assert a.hash == b.hash and len(a.hash) == 12
    assert a.run_name() == f"simulate-{a.hash}"


def test_hash_ignores_output_dir_and_tracks_content():
    base = {"model": "snls", "n": 1, "p": 4}
    h = build_config(base, "simulate").hash
    assert build_config({**base, "output_dir": "/elsewhere"}, "simulate").hash == h
    assert build_config({**base, "grid": {"N": 128}}, "simulate").hash != h


@given(N=st.sampled_from([64, 128, 256]), dt=st.floats(1e-5, 1e-1), seed=st.integers(0, 1000))
def test_hash_deterministic(N, dt, seed):
    raw = {"model": "hw", "n": 1, "p": 3, "grid": {"N": N}, "stepper": {"dt": dt}, "seeds": {"perturbation": seed}}
    assert build_config(json.loads(json.dumps(raw)), "simulate").hash == build_config(raw, "simulate").hash


@pytest.mark.parametrize("n,p", [(1, 3.0), (2, 2.0), (3, 5.0 / 3.0)])
def test_critical_exponent_rejected(n, p):
    with pytest.raises(ConfigError, match="critical"):
        build_config({"model": "hw", "n": n, "p": p}, "groundstate")


def test_simulate_accepts_critical_exponent():
    assert build_config({"model": "hw", "n": 1, "p": 3}, "simulate").model.is_critical


def test_negative_dt_rejected():
    with pytest.raises(ConfigError, match="dt"):
        build_config({"model": "hw", "n": 1, "p": 4, "stepper": {"dt": -1e-3}}, "simulate")


def test_window_error_names_the_classification():
    with pytest.raises(ConfigError) as exc:
        build_config({"model": "hw", "n": 1, "p": 2.2}, "instability")
    msg = str(exc.value)
    assert "subcritical" in msg and "'instability' requires supercritical window" in msg


def test_unknown_keys_and_bad_json_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        build_config({"model": "hw", "n": 1, "p": 4, "gird": {}}, "simulate")
    with pytest.raises(ConfigError, match="unknown"):
        build_config({"model": "hw", "n": 1, "p": 4, "grid": {"NN": 3}}, "simulate")
    with pytest.raises(ConfigError, match="JSON"):
        parse_config("{model: hw}", "simulate")


def test_errors_are_all_listed():
    with pytest.raises(ConfigError) as exc:
        build_config({"model": "xx", "n": 1, "stepper": {"dt": -1.0}}, "simulate")
    assert len(exc.value.errors) >= 3


def test_overrides_parse_json_values():
    cfg = parse_config('{"model": "hw", "n": 1, "p": 4}', "simulate",
                       ["grid.N=128", "experiment.R_virial=[2, 4]", "initial.preset=plane_wave"])
    assert cfg.section("grid")["N"] == 128
    assert cfg.section("experiment")["R_virial"] == [2, 4]
    assert cfg.section("initial")["preset"] == "plane_wave"
    with pytest.raises(ConfigError):
        parse_config('{"model": "hw", "n": 1, "p": 4}', "simulate", ["grid.N"])


def test_subcommand_mismatch_rejected():
    with pytest.raises(ConfigError, match="differs"):
        build_config({"subcommand": "stability", "model": "snls", "n": 1, "p": 4}, "simulate")


# --- CLI -----------------------------------------------------------------------


def test_cli_usage_errors(tmp_path, capsys):
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.json")]) == 1
    bad = _write(tmp_path, {"model": "hw", "n": 1, "p": 4, "bogus": 1})
    assert cli.main(["simulate", "--config", str(bad), "--output-root", str(tmp_path / "r")]) == 1
    assert "bogus" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        cli.main(["no-such-command"])
    assert exc.value.code == 1


def test_parser_lists_every_subcommand():
    text = cli.build_parser().format_help()
    assert all(s in text for s in SUBCOMMANDS) and "plot" in text


def test_simulate_plane_wave_constant_observables(tmp_path):
    code, run_dir = _run(tmp_path, "simulate", PLANE_WAVE)
    assert code == 0
    cfg = json.loads((run_dir / "config.json").read_text())
    assert cfg["schema_version"] == 1 and cfg["config"]["initial"]["preset"] == "plane_wave"
    report = json.loads((run_dir / "report.json").read_text())
    assert report["contract_satisfied"] is True and report["exit_code"] == 0
    rows = list(csv.DictReader((run_dir / "series.csv").open()))
    assert len(rows) == 11
    for name in ("mass", "E", "H_half_hom"):
        s = np.array([float(r[name]) for r in rows])
        assert np.max(np.abs(s - s[0])) <= 1e-12 * abs(s[0])
    assert len(list((run_dir / "snapshots").glob("*.json"))) == 3
    assert (run_dir / "series.dat").exists()


def test_reference_mode_is_byte_identical(tmp_path):
    _, a = _run(tmp_path, "simulate", PLANE_WAVE, "--no-plots", root="a")
    _, b = _run(tmp_path, "simulate", PLANE_WAVE, "--no-plots", root="b")
    assert a.name == b.name
    assert (a / "series.csv").read_bytes() == (b / "series.csv").read_bytes()


def test_groundstate_run_artifacts(tmp_path):
    code, run_dir = _run(tmp_path, "groundstate", GROUNDSTATE_1D)
    assert code == 0
    report = json.loads((run_dir / "report.json").read_text())
    assert report["converged"] is True
    assert (run_dir / "ground_state.json").exists() and (run_dir / "ground_state.f64").exists()


def test_instability_at_lambda_one_refuses_with_exit_two(tmp_path):
    code, run_dir = _run(tmp_path, "instability", INSTABILITY_2D, "--override", "experiment.lambda=1.0", "--no-plots")
    assert code == 2
    report = json.loads((run_dir / "report.json").read_text())
    assert report["contract_satisfied"] is False
    assert "not negative" in report["reason"]


def test_inequalities_run_writes_sweep(tmp_path):
    code, run_dir = _run(tmp_path, "inequalities", {"model": "hw", "n": 2, "p": 2.5})
    assert code == 0
    header = (run_dir / "series.csv").read_text().splitlines()[0]
    assert header == "family,parameter,LHS,RHS,ratio"
    report = json.loads((run_dir / "report.json").read_text())
    assert report["strauss"]["error"] <= 1e-6
    assert report["bg_lacunary"]["naive_growth"] >= 1.5


# --- plot data -----------------------------------------------------------------


def test_plot_on_empty_directory_lists_missing(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(PlotDataError) as exc:
        emit_plot_data(empty)
    assert "series.csv" in str(exc.value) and "report.json" in str(exc.value)
    assert cli.main(["plot", str(empty)]) == 1
    assert "series.csv" in capsys.readouterr().err


def test_plot_subcommand_rewrites_dat(tmp_path, capsys):
    _, run_dir = _run(tmp_path, "simulate", PLANE_WAVE, "--no-plots")
    assert not (run_dir / "series.dat").exists()
    assert cli.main(["plot", str(run_dir)]) == 0
    dat = (run_dir / "series.dat").read_text().splitlines()
    assert dat[0].startswith("#")
    assert len(dat[1].split()) == len(dat[0].lstrip("# ").split())
