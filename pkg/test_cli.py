import csv
import json

import pytest

import app_config
import main as cli
from app_config import (DEFAULT_SETTINGS, load_settings, merge_settings, parse_data_spec, parse_int_list,
                        profile_from_settings)
from core import Constant, Strip
from errors import ConfigError
from main import main, parse_args_and_config
from results_manager import ResultsManager, fmt


def _read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def test_fmt_is_locale_free():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(float("inf")) == "inf"
    assert fmt(3) == "3"
    assert fmt(True) == "1"


def test_render_report_counts_graded_lines():
    text = ResultsManager.render_report("demo", [("a", True, "ok"), ("b", False, "bad"), ("c", None, "info")])
    lines = text.splitlines()
    assert lines[1] == "PASS a: ok"
    assert lines[2] == "FAIL b: bad"
    assert lines[3] == "INFO c: info"
    assert lines[-1] == "# 1/2 passed"


def test_merge_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        merge_settings({"profile": {"width": 1}})
    with pytest.raises(ConfigError):
        merge_settings({"plot": {}})
    with pytest.raises(ConfigError):
        merge_settings({"simulate": {"T": "long"}})
    merged = merge_settings({"simulate": {"T": "5", "per_mode": "yes"}})
    assert merged["simulate"]["T"] == 5.0 and merged["simulate"]["per_mode"] is True
    assert DEFAULT_SETTINGS["simulate"]["T"] == 100.0


def test_parsers():
    assert parse_int_list("1..3,7") == [1, 2, 3, 7]
    assert parse_data_spec("1:0:1, 2:1:0.5+1j") == [(1, 0, 1 + 0j), (2, 1, 0.5 + 1j)]
    with pytest.raises(ConfigError):
        parse_data_spec("1:0")
    with pytest.raises(ConfigError):
        parse_int_list("1..x")
    assert profile_from_settings(DEFAULT_SETTINGS["profile"]) == Strip(1.0, 0.25)
    assert profile_from_settings({**DEFAULT_SETTINGS["profile"], "kind": "constant"}) == Constant(1.0)


def test_ini_and_json_config_files(tmp_path):
    ini = tmp_path / "lab.ini"
    ini.write_text("[profile]\nkind = constant\nc = 0.5\n\n[resolvent]\ncount = 12\n")
    settings = load_settings(str(ini))
    assert settings["profile"]["c"] == 0.5
    assert settings["resolvent"]["count"] == 12
    js = tmp_path / "lab.json"
    js.write_text(json.dumps({"quasimode": {"margin": 0.1}}))
    assert load_settings(str(js))["quasimode"]["margin"] == 0.1
    with pytest.raises(ConfigError):
        load_settings(str(tmp_path / "missing.ini"))


@pytest.mark.parametrize("name", ["settings.ini", "settings.json"])
def test_export_config_round_trip(tmp_path, name):
    out = tmp_path / name
    assert main(["export-config", "--sigma", "0.2", "-o", str(out)]) == 0
    loaded = load_settings(str(out))
    expected = app_config.merge_settings({"profile": {"sigma": 0.2}, "general": {"output": str(out)}})
    assert loaded == expected


def test_flags_override_config_file(tmp_path):
    ini = tmp_path / "lab.ini"
    ini.write_text("[profile]\nsigma = 0.3\nBtilde = 2.0\n")
    config = parse_args_and_config(["quasimode", "--config", str(ini), "--sigma", "0.2"])
    assert config.profile == Strip(2.0, 0.2)
    assert config.command == "quasimode"


def test_usage_errors_exit_with_two(tmp_path, capsys):
    assert main(["branch", "--domain", "torus", "--boundary", "dirichlet"]) == 2
    assert "UsageError" in capsys.readouterr().err
    assert main(["branch", "--profile", "constant", "-o", str(tmp_path / "b.csv")]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[profile]\nwidth = 3\n")
    assert main(["quasimode", "--config", str(bad)]) == 2
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["quasimode", "--bogus"])
    assert exc.value.code == 2


def test_module_errors_exit_with_one(tmp_path, capsys):
    assert main(["quasimode", "--profile", "constant", "--c", "1", "-o", str(tmp_path / "q.csv")]) == 1
    assert "NoGap" in capsys.readouterr().err


def test_quasimode_csv(tmp_path):
    out = tmp_path / "q.csv"
    assert main(["quasimode", "--n", "1..3", "-o", str(out)]) == 0
    rows = _read_csv(out)
    assert rows[0] == ["n", "ratio", "lower_bound_C"]
    assert [r[0] for r in rows[1:]] == ["1", "2", "3"]
    assert len({r[1] for r in rows[1:]}) == 1


def test_branch_csv_is_deterministic(tmp_path):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["branch", "--h", "0.01,0.02", "-o", str(first)]) == 0
    assert main(["branch", "--h", "0.02,0.01", "-o", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    rows = _read_csv(first)
    assert rows[0][:4] == ["parity", "m", "n", "h"]
    assert [float(r[3]) for r in rows[1:]] == [0.02, 0.01]


def test_simulate_writes_trace_and_summary(tmp_path):
    out = tmp_path / "trace.csv"
    code = main(["simulate", "--profile", "strip", "--T", "0.2", "--dt", "1e-3", "--grid-N", "64",
                 "--trace-samples", "20", "--per-mode", "-o", str(out)])
    assert code == 0
    rows = _read_csv(out)
    assert rows[0] == ["t", "E", "cumulative_damping", "E_n-1", "E_n1"]
    assert len(rows) == 22
    summary = json.loads((tmp_path / "trace.csv.fit.json").read_text())
    assert summary["identity_residual"] <= 1e-9 * summary["E0"]


def test_simulate_rejects_cfl_violation(tmp_path):
    assert main(["simulate", "--T", "1", "--dt", "0.1", "--grid-N", "64", "-o", str(tmp_path / "t.csv")]) == 1


def test_semigroup_verify_report(tmp_path):
    out = tmp_path / "report.txt"
    code = main(["semigroup-verify", "--cutoff", "4", "--s-list", "5,10", "--z-count", "3", "-o", str(out)])
    text = out.read_text()
    assert code == 0
    assert text.startswith("# semigroup-verify")
    assert "PASS spectrum localization" in text
    assert "FAIL" not in text
    rows = _read_csv(str(out) + ".csv")
    assert rows[0][0] == "s" and len(rows) == 3


@pytest.mark.slow
def test_verify_all_quick(tmp_path):
    out = tmp_path / "verify.txt"
    assert main(["verify-all", "--quick", "-o", str(out)]) == 0
    assert "FAIL" not in out.read_text()


def test_unexpected_errors_exit_with_one(monkeypatch, capsys):
    def broken(config):
        raise ValueError("operands could not be broadcast")

    monkeypatch.setitem(cli.HANDLERS, "quasimode", broken)
    assert main(["quasimode"]) == 1
    assert "ValueError: operands could not be broadcast" in capsys.readouterr().err
