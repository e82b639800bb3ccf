"""CLI: config parsing, deterministic output files, exit codes."""

import json

import pytest

from katospec.cli import (load_config, main, parse_config_text,
                          potential_from_config, write_csv, write_json)
from katospec.errors import ConfigError


def test_parse_config_text_sections_and_values():
    cfg = parse_config_text(
        "# comment\n"
        "top = 3\n"
        "[a.b]\n"
        "flag = true\n"
        "name = \"well\"  # trailing comment\n"
        "vals = [1.0, 2, 3.5]\n")
    assert cfg["top"] == 3
    assert cfg["a"]["b"]["flag"] is True
    assert cfg["a"]["b"]["name"] == "well"
    assert cfg["a"]["b"]["vals"] == [1.0, 2, 3.5]


def test_parse_config_text_rejects_bad_line():
    with pytest.raises(ConfigError):
        parse_config_text("not a key value line\n")


def test_load_config_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"grid": {"radial_order": 16}}')
    assert load_config(path)["grid"]["radial_order"] == 16


def test_load_config_missing_raises():
    with pytest.raises(ConfigError):
        load_config("no_such_config_anywhere")


def test_bundled_demo_config_parses():
    cfg = load_config("square_well_demo")
    p = potential_from_config(cfg["potential"])
    assert len(p.primitives) == 1
    prim = p.primitives[0]
    assert prim.shape == "square_well"
    assert prim.amplitude == -4.0
    assert any(k.startswith("experiment") for k in cfg)


def test_write_csv_format(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ["a", "b"], [(1.0, "x"), (0.123456789012345, "y")])
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode("utf-8").strip().split("\n")
    assert lines[0] == "a,b"
    assert lines[1] == "1,x"


def test_write_json_stable_key_order(tmp_path):
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    write_json(p1, {"z": 1, "a": {"y": 2, "b": 3}})
    write_json(p2, {"a": {"b": 3, "y": 2}, "z": 1})
    assert p1.read_bytes() == p2.read_bytes()
    assert list(json.loads(p1.read_text())) == ["a", "z"]


def test_usage_errors_exit_2(tmp_path):
    assert main(["definitely-not-a-command"]) == 2
    assert main(["verify", "--suite", "huge", "--out", str(tmp_path)]) == 2


def test_numerical_failure_exits_3(tmp_path):
    # sin(50 eta) cannot be resolved by the default panel width
    rc = main(["wave", "--tau", "50", "--out", str(tmp_path),
               "--no-figures"])
    assert rc == 3


def test_heat_command_writes_outputs(tmp_path):
    rc = main(["heat", "--t", "1.0", "--seps", "1.0", "2.0",
               "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "heat.csv").exists()
    assert (tmp_path / "heat.png").exists()
    header = (tmp_path / "heat.csv").read_text().splitlines()[0]
    assert header == "sep,x_norm,y_norm,value,im_residual,kind,parameter"


def test_no_figures_flag(tmp_path):
    rc = main(["poisson", "--t", "1.0", "--seps", "1.0",
               "--out", str(tmp_path), "--no-figures"])
    assert rc == 0
    assert (tmp_path / "poisson.csv").exists()
    assert not (tmp_path / "poisson.png").exists()


def test_spectrum_command_square_well(tmp_path, capsys):
    rc = main(["spectrum", "--shape", "square_well", "--amplitude", "-4.0",
               "--out", str(tmp_path), "--no-figures"])
    assert rc == 0
    rep = json.loads((tmp_path / "spectrum.json").read_text())
    assert rep["count"] == 1
    assert rep["states"][0]["lambda_k"] == pytest.approx(-0.40710148, rel=1e-5)
    assert "count=1" in capsys.readouterr().out
