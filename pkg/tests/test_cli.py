"""Command-line behavior: config resolution, exit codes, artifacts."""

import csv
import json

import numpy as np
import pytest

from gibbsdyn.cli import DEFAULTS, ConfigError, _apply_override, load_config, main
from gibbsdyn.container import load_ensemble, load_noise
from gibbsdyn.spectral import GridSpec, omega2


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


# ---------------------------------------------------------------------------
# configuration resolution
# ---------------------------------------------------------------------------


def test_missing_config_file_exits_64(tmp_path, capsys):
    rc = run(tmp_path, "invariance", "--config", str(tmp_path / "absent.json"))
    assert rc == 64
    assert "not found" in capsys.readouterr().err


def test_unknown_top_level_key_exits_64(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"grid": {"d": 1, "M": 18, "s": 2.0}, "bogus": 1}')
    rc = run(tmp_path, "invariance", "--config", str(cfg))
    assert rc == 64
    assert "bogus" in capsys.readouterr().err


def test_unknown_section_key_exits_64(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"grid": {"d": 1, "M": 18, "wavenumber": 7}}')
    rc = run(tmp_path, "invariance", "--config", str(cfg))
    assert rc == 64
    assert "wavenumber" in capsys.readouterr().err


def test_malformed_json_exits_64(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    rc = run(tmp_path, "simulate", "--config", str(cfg))
    assert rc == 64
    assert "JSON" in capsys.readouterr().err


def test_bad_set_syntax_exits_64(tmp_path, capsys):
    assert run(tmp_path, "invariance", "--set", "novalue") == 64
    assert "key=value" in capsys.readouterr().err


def test_bad_seed_and_threads_exit_64(tmp_path):
    assert run(tmp_path, "invariance", "--seed", "-3") == 64
    assert run(tmp_path, "invariance", "--threads", "0") == 64


def test_usage_errors_exit_64(capsys):
    assert main([]) == 64
    assert main(["not-a-subcommand"]) == 64
    capsys.readouterr()


def test_override_precedence_and_echo(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": {"z_threshold": 9.0}, "seed": 5}))
    resolved = load_config("invariance", str(cfg), ["experiment.z_threshold=7.5"], seed=777)
    assert resolved["experiment"]["z_threshold"] == 7.5  # --set beats the file
    assert resolved["seed"] == 777  # the flag beats the file
    # defaults for untouched keys survive so the echo is complete
    assert resolved["flow"]["h"] == DEFAULTS["invariance"]["flow"]["h"]


def test_set_values_parse_as_json():
    cfg = {"a": {}}
    _apply_override(cfg, "a.flag=false")
    _apply_override(cfg, "a.nums=[1,2]")
    _apply_override(cfg, "a.word=hello")
    assert cfg["a"] == {"flag": False, "nums": [1, 2], "word": "hello"}


def test_env_threads_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("GIBBSDYN_THREADS", "3")
    assert load_config("invariance", None, [])["threads"] == 3
    # the flag beats the environment
    assert load_config("invariance", None, [], threads=2)["threads"] == 2
    # an explicit config value beats the environment
    assert load_config("invariance", None, ["threads=4"])["threads"] == 4
    monkeypatch.setenv("GIBBSDYN_THREADS", "zzz")
    with pytest.raises(ConfigError):
        load_config("invariance", None, [])


# ---------------------------------------------------------------------------
# subcommands and exit codes
# ---------------------------------------------------------------------------


def small_invariance(*extra):
    return [
        "invariance",
        "--set", "experiment.ensemble_size=64",
        "--set", "experiment.ess_floor=8.0",
        "--set", "flow.T=0.2",
        *extra,
    ]


def test_invariance_pass_writes_artifacts(tmp_path, capsys):
    rc = run(tmp_path, *small_invariance())
    out = capsys.readouterr().out
    assert rc == 0
    assert "verdict: pass" in out
    assert out.count("PASS") >= 4  # one line per gate
    doc = json.loads((tmp_path / "invariance_report.json").read_text())
    assert doc["schema_version"] == 1
    assert doc["verdict"] == "pass"
    # full resolved config echoed, including untouched defaults
    assert doc["config"]["z_threshold"] == 4.0
    assert doc["config"]["flow"]["h"] == 0.01
    assert "threads" not in doc["config"]
    assert (tmp_path / "invariance_runtime.json").exists()
    assert (tmp_path / "invariance_series.csv").exists()


def test_gate_failure_exits_2(tmp_path, capsys):
    # independent noise across truncations destroys the pathwise decay rate
    rc = run(tmp_path, "nstability", "--set", "experiment.shared_noise=false")
    assert rc == 2
    assert "verdict: fail" in capsys.readouterr().out


def test_inconclusive_exits_3(tmp_path, capsys):
    rc = run(tmp_path, *small_invariance("--set", "experiment.ess_floor=1e6"))
    assert rc == 3
    assert "verdict: inconclusive" in capsys.readouterr().out


def test_numerical_failure_exits_70(tmp_path, capsys):
    rc = run(tmp_path, "control", "--set", "control.t=1e-6", "--set", "control.steps=64")
    assert rc == 70
    assert "numerical failure" in capsys.readouterr().err


def test_reports_byte_identical_across_threads(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    assert main([*small_invariance(), "--threads", "1", "--out", str(a)]) == 0
    assert main([*small_invariance(), "--threads", "4", "--out", str(b)]) == 0
    capsys.readouterr()
    ra = (a / "invariance_report.json").read_bytes()
    rb = (b / "invariance_report.json").read_bytes()
    assert ra == rb


def test_sample_mu_roundtrip(tmp_path, capsys):
    rc = run(
        tmp_path, "sample",
        "--set", "sample.measure=mu", "--set", "sample.count=32",
        "--set", "grid.M=10", "--seed", "3",
    )
    assert rc == 0
    capsys.readouterr()
    ens = load_ensemble(tmp_path / "ensemble_mu.bin")
    assert ens.states.shape == (32, 2, 9)
    assert np.all(ens.log_weights == 0.0)


def test_sample_rho_reports_ess(tmp_path, capsys):
    rc = run(
        tmp_path, "sample",
        "--set", "sample.count=64", "--set", "grid.M=18", "--set", "gibbs.N=4",
    )
    assert rc == 0
    capsys.readouterr()
    doc = json.loads((tmp_path / "sample_report.json").read_text())
    assert 2.0 <= doc["stats"]["ess"] <= 64.0
    ens = load_ensemble(tmp_path / "ensemble_rho.bin")
    assert np.all(ens.log_weights <= 0.0)


def test_sample_rejects_unknown_measure(tmp_path, capsys):
    rc = run(tmp_path, "sample", "--set", "sample.measure=nu")
    assert rc == 64
    capsys.readouterr()


def test_simulate_long_run_matches_gaussian_moment(tmp_path, capsys):
    rc = run(
        tmp_path, "simulate", "--seed", "11",
        "--set", "grid.M=10",
        "--set", "flow.N=-1", "--set", "flow.gamma=0.0",
        "--set", "flow.h=0.05", "--set", "flow.T=800.0",
        "--set", "flow.record_noise=false",
    )
    assert rc == 0
    capsys.readouterr()
    with open(tmp_path / "trajectory.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    t = np.array([float(r["t"]) for r in rows])
    l2 = np.array([float(r["l2_u"]) for r in rows])
    exact = float(np.sum(1.0 / omega2(GridSpec(1, 10, 2.0))))
    tail_mean = float(np.mean(l2[t > 40.0]))
    assert abs(tail_mean - exact) / exact < 0.10
    # the run starts from zero, so the first row is exactly zero
    assert l2[0] == 0.0 and t[0] == 0.0


def test_simulate_csv_is_rfc4180(tmp_path, capsys):
    rc = run(tmp_path, "simulate", "--set", "flow.T=0.5")
    assert rc == 0
    capsys.readouterr()
    raw = (tmp_path / "trajectory.csv").read_bytes()
    assert b"\r\n" in raw
    header = raw.split(b"\r\n", 1)[0].decode()
    assert header == "t,E_v,l2_u,l2_ut,holder_alpha,xalpha_proxy"


def test_simulate_dumps_containers(tmp_path, capsys):
    rc = run(
        tmp_path, "simulate",
        "--set", "flow.T=0.5",
        "--set", "simulate.dump_states=true", "--set", "simulate.dump_noise=true",
    )
    assert rc == 0
    capsys.readouterr()
    states = load_ensemble(tmp_path / "trajectory_states.bin")
    noise = load_noise(tmp_path / "trajectory_noise.bin")
    with open(tmp_path / "trajectory.csv", newline="") as fh:
        n_rows = len(list(csv.DictReader(fh)))
    assert states.states.shape[0] == n_rows
    assert noise.n_steps == 2 * round(0.5 / 0.01)  # half-step spacing


def test_simulate_dump_noise_requires_recording(tmp_path, capsys):
    rc = run(
        tmp_path, "simulate",
        "--set", "flow.T=0.5",
        "--set", "flow.record_noise=false", "--set", "simulate.dump_noise=true",
    )
    assert rc == 64
    capsys.readouterr()


def test_control_report_and_gram_csv(tmp_path, capsys):
    rc = run(tmp_path, "control")
    assert rc == 0
    out = capsys.readouterr().out
    assert "reconstruction_residual" in out
    doc = json.loads((tmp_path / "control_report.json").read_text())
    assert doc["stats"]["residual"] <= 1e-6
    with open(tmp_path / "control_gram.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["n"] for r in rows] == [str(n) for n in range(4, 9)]
    for r in rows:
        assert abs(float(r["eig_min"]) - 0.5) <= 0.05
        assert abs(float(r["eig_max"]) - 0.5) <= 0.05


def test_selftest_passes_on_defaults(tmp_path, capsys):
    rc = run(tmp_path, "selftest")
    out = capsys.readouterr().out
    assert rc == 0
    assert out.count("verdict: pass") == 6
    for name in ("invariance", "ergodicity", "linear", "decay", "nstability", "coupling"):
        assert (tmp_path / f"selftest_{name}_report.json").exists()
