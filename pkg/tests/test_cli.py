import json

import pytest

from bethe_lab import __version__, cli


def run(capsys, *argv):
    code = cli.run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_free(capsys):
    code, out, _ = run(capsys, "free", "--K", "2", "--E", "1.0")
    doc = json.loads(out)
    assert code == 0
    assert doc["version"] == __version__
    assert doc["config"]["K"] == 2 and doc["config"]["E"] == 1.0
    assert doc["result"]["L0"] == 0.34657359
    assert doc["result"]["criterion"] == "holds"


def test_spectrum(capsys):
    code, out, _ = run(capsys, "spectrum", "--K", "2", "--lambda", "0.5")
    assert code == 0
    assert json.loads(out)["result"]["edges"] == [-3.32842712, 3.32842712]


def test_unknown_flag_exits_one_with_usage(capsys):
    code, _, err = run(capsys, "free", "--bogus", "3")
    assert code == 1
    assert "usage:" in err


def test_invalid_value_exits_one(capsys):
    assert run(capsys, "free", "--K", "1")[0] == 1
    assert run(capsys, "lyap", "--lambda", "-0.1")[0] == 1


def test_verification_failure_exits_two(capsys):
    code, out, _ = run(capsys, "verify", "boundary", "--lambda", "0", "--E", "0",
                       "--depths", "4,6,8", "--n", "5")
    assert code == 2
    assert json.loads(out)["result"]["pass"] is False


def test_io_error_exits_three(capsys, tmp_path):
    code, _, err = run(capsys, "free", "--output", str(tmp_path / "missing" / "x.json"))
    assert code == 3
    assert "error" in err


def test_config_file_defaults_and_overrides(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"K": 3, "E": 0.5}))
    doc = json.loads(run(capsys, "free", "--config", str(cfg), "--E", "4.5")[1])
    assert doc["config"]["K"] == 3 and doc["config"]["E"] == 4.5
    cfg.write_text(json.dumps({"nope": 1}))
    assert run(capsys, "free", "--config", str(cfg))[0] == 1


def test_verify_lb_report_schema(capsys):
    code, out, _ = run(capsys, "verify", "lb", "--K", "2", "--lambda", "0.05", "--R", "8",
                       "--n", "50", "--seed", "7")
    res = json.loads(out)["result"]
    assert code == 0
    assert set(res) == {"check", "params", "n", "violations", "fitted_constants", "pass"}


def test_phase_csv(capsys, tmp_path):
    path = tmp_path / "p.csv"
    code = run(capsys, "phase", "--K", "2", "--lambdas", "0", "--energies=-3:3:3",
               "--method", "closed-form", "--format", "csv", "--output", str(path))[0]
    assert code == 0
    assert path.read_text().splitlines()[1].endswith("outside-spectrum")
    assert json.loads(path.with_suffix(".json").read_text())["K"] == 2


def test_threads_env_fallback(capsys, monkeypatch):
    argv = ["lyap", "--K", "2", "--lambda", "0.2", "--E", "0.1", "--R", "6", "--n", "20"]
    monkeypatch.setenv("BETHE_LAB_THREADS", "1")
    a = run(capsys, *argv)[1]
    monkeypatch.setenv("BETHE_LAB_THREADS", "4")
    assert run(capsys, *argv)[1] == a


def test_numbers_have_nine_significant_digits(capsys):
    doc = json.loads(run(capsys, "free", "--K", "3", "--E", "0.123456789123")[1])
    assert doc["config"]["E"] == 0.123456789
