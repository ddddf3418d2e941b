import json

import pytest

from minksoliton import cli
from minksoliton.cli import OUT_ENV, main, output_dir, parse_config, run
from minksoliton.errors import MaxItersExceeded, SchemaError


def test_valid_radial_config():
    cfg = parse_config('{"command":"radial","n":3,"C":2.0,"H":{"kind":"constant"},"r_max":1000}')
    assert cfg.command == "radial"
    assert cfg.params["r_max"] == 1000
    assert len(cfg.config_hash) == 64


@pytest.mark.parametrize("text, message", [
    ('{"command":"radial","C":1.0}', "C must exceed 1"),
    ('{"command":"radial","n":2}', "n must be ≥ 3"),
    ('{"command":"dirichlet","h":0}', "h must be positive"),
])
def test_schema_errors(text, message):
    with pytest.raises(SchemaError) as info:
        parse_config(text)
    assert any(message in m for _, m in info.value.violations)


def test_all_violations_are_collected():
    with pytest.raises(SchemaError) as info:
        parse_config('{"command":"entire","n":2,"C":0.5,"radii":[4,2]}')
    paths = {p for p, _ in info.value.violations}
    assert {"n", "C", "radii"} <= paths


def test_malformed_json_and_unknown_command():
    with pytest.raises(SchemaError):
        parse_config("{not json")
    with pytest.raises(SchemaError):
        parse_config('{"command":"plot"}')


def test_seed_changes_hash():
    a = parse_config('{"command":"oracle"}', seed=1)
    b = parse_config('{"command":"oracle"}', seed=2)
    assert a.config_hash != b.config_hash


def test_output_dir_precedence(monkeypatch, tmp_path):
    cfg = parse_config('{"command":"oracle","out":"from_config"}')
    monkeypatch.delenv(OUT_ENV, raising=False)
    assert output_dir(None, cfg).name == "from_config"
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    assert output_dir(None, cfg) == tmp_path / "env"
    assert output_dir(str(tmp_path / "flag"), cfg) == tmp_path / "flag"


def test_oracle_run(tmp_path):
    code = main(["oracle", "--out", str(tmp_path), "--seed", "3"])
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["seed"] == 3
    assert report["invariants"]["all_passed"]
    assert (tmp_path / "riccati.csv").read_text().startswith("A0,B0,r0,z0,limit,max_abs_diff")


def test_radial_run_is_deterministic(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text('{"command":"radial","r_max":100}')
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["radial", "--config", str(conf), "--out", str(out)]) == 0
    for name in ("profile.csv", "fit.json", "report.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    fit = json.loads((outs[0] / "fit.json").read_text())
    assert fit["log_coeff"] == pytest.approx(0.1443376, rel=1e-3)


def test_dirichlet_run(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text('{"command":"dirichlet","h":0.25}')
    assert main(["dirichlet", "--config", str(conf), "--out", str(tmp_path)]) == 0
    monitors = json.loads((tmp_path / "monitors.json").read_text())
    assert "max_nu_boundary" in monitors["final"]
    assert (tmp_path / "field.txt").exists()


def test_config_error_exit_code(tmp_path, capsys):
    conf = tmp_path / "c.json"
    conf.write_text('{"command":"radial","C":1.0}')
    assert main(["radial", "--config", str(conf), "--out", str(tmp_path)]) == 2
    assert "C must exceed 1" in capsys.readouterr().err


def test_quadratic_model_requires_sigma_one():
    with pytest.raises(SchemaError):
        parse_config('{"command":"radial","sigma":0.5,"H":{"kind":"quadratic","k":0.3}}')


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    def failing(cfg, out):
        raise MaxItersExceeded("residual 1e-3 after 30 iterations", 0.5)

    monkeypatch.setitem(cli.RUNNERS, "oracle", failing)
    assert run(parse_config('{"command":"oracle"}'), tmp_path) == 1
    diag = json.loads((tmp_path / "error.json").read_text())
    assert diag["error"] == "MaxItersExceeded"
    assert diag["sigma"] == 0.5
    assert len(diag["config_hash"]) == 64


def test_verify(tmp_path):
    assert main(["verify", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert all(report["invariants"]["checks"].values())
