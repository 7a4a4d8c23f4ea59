import json
import math

import pytest

from ricianmle.cli import main
from ricianmle.config import SEED_ENV, ConfigError, RunConfig, parse_config, parse_omega


def test_defaults_for_sync():
    cfg = parse_config()
    assert (cfg.N, cfg.M, cfg.L, cfg.D, cfg.Omega, cfg.Q) == (1000, 48, 60, 0, 0.0, 128)
    assert (cfg.noise_var, cfg.active_prob, cfg.g) == (2.0, 0.08, 1.0)
    assert cfg.kappa == pytest.approx(0.1, rel=1e-15)
    assert (cfg.n_trials, cfg.epsilon, cfg.max_iters) == (100, 1e-7, 1000)


def test_async_defaults():
    cfg = parse_config(None, {"case": "tf"})
    assert cfg.D == 4 and cfg.Omega == math.pi


def test_kappa_linear():
    assert parse_config(None, {"kappa_linear": 0.5}).kappa == 0.5
    with pytest.raises(ConfigError):
        parse_config(None, {"kappa_linear": 0.5, "kappa_db": 0.0})


@pytest.mark.parametrize("over,field", [({"case": "f", "Omega": 0}, "Omega"), ({"bogus": 1}, "bogus"),
                                        ({"case": "sync", "D": 2}, "D"), ({"N": 0}, "N"),
                                        ({"case": "sync", "strategy": "fft"}, "strategy"),
                                        ({"active_prob": 1.0}, "active_prob"), ({"case": "xy"}, "case"),
                                        ({"M": 2.5}, "M")])
def test_config_errors(over, field):
    with pytest.raises(ConfigError) as ei:
        parse_config(None, over)
    assert ei.value.field == field


def test_config_file_and_env(tmp_path, monkeypatch):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"case": "t", "D": 2, "N": 50}))
    monkeypatch.setenv(SEED_ENV, "17")
    cfg = parse_config(str(p), {"N": 60})
    assert (cfg.D, cfg.N, cfg.master_seed) == (2, 60, 17)
    assert parse_config(str(p), {"master_seed": 4}).master_seed == 4


@pytest.mark.parametrize("text,val", [("pi", math.pi), ("0.5pi", 0.5 * math.pi), ("pi/4", math.pi / 4),
                                      ("0.25*pi", 0.25 * math.pi), (1, math.pi), ("0.5", 0.5 * math.pi)])
def test_parse_omega(text, val):
    assert parse_omega(text) == pytest.approx(val)


def test_parse_omega_garbage():
    with pytest.raises(ConfigError):
        parse_omega("half")


def test_complexity_command(capsys):
    assert main(["complexity", "--case", "t", "--L", "60", "--M", "48", "--Q", "128",
                 "--D", "4", "--Omega", "pi"]) == 0
    out = dict(l.split(" = ", 1) for l in capsys.readouterr().out.splitlines())
    assert abs(float(out["Dunder_t"]) - 29.5) <= 0.1
    assert out["recommended"].startswith("direct")


def test_verify_quick(capsys):
    assert main(["verify", "--quick"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    summary = json.loads(lines[-1])
    assert summary["failed"] == 0 and summary["suites"] == summary["passed"] > 0


def _sweep(tmp_path, name, threads):
    csv = tmp_path / f"{name}.csv"
    js = tmp_path / f"{name}.json"
    rc = main(["sweep", "--case", "t", "--N", "40", "--L", "12", "--M", "8", "--D", "2",
               "--trials", "6", "--seed", "9", "--threads", str(threads),
               "--csv", str(csv), "--json", str(js)])
    assert rc == 0
    return csv.read_bytes(), json.loads(js.read_text())


def test_sweep_byte_identical(tmp_path):
    a, ja = _sweep(tmp_path, "a", 1)
    b, _ = _sweep(tmp_path, "b", 1)
    c, _ = _sweep(tmp_path, "c", 3)
    assert a == b == c
    assert a.startswith(b"theta,error_prob,std_err\n") and a.count(b"\n") == 101
    assert ja["n_trials"] == 6


def test_detect_command(capsys):
    assert main(["detect", "--case", "sync", "--N", "30", "--L", "16", "--M", "8",
                 "--noise-var", "0.05", "--theta", "0.5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["case"] == "sync" and "error_prob" in out


def test_bench_command(tmp_path):
    csv = tmp_path / "bench.csv"
    assert main(["bench", "--case", "t", "--N", "10", "--L", "8", "--M", "4",
                 "--D-list", "0,2", "--trials", "1", "--csv", str(csv)]) == 0
    rows = csv.read_text().splitlines()
    assert rows[0] == "case,D,omega_over_pi,Q,strategy,median_time_ns,flops_model"
    assert len(rows) == 5


def test_errors_become_json(capsys):
    assert main(["sweep", "--case", "f", "--Omega", "0"]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config" and err["field"] == "Omega"


def test_to_dict_roundtrip():
    cfg = parse_config(None, {"case": "f", "Omega": "0.5pi", "Q": 64})
    d = cfg.to_dict()
    assert d["Omega"] == "0.5pi"
    d = {k: v for k, v in json.loads(json.dumps(d)).items() if v is not None}
    assert parse_config(None, d) == cfg
