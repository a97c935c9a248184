from __future__ import annotations

import csv
import json
import math

import pytest
from click.testing import CliRunner

from hexmpo.cli import EXIT_CONFIG, EXIT_PARTIAL, main
from hexmpo.runner import (
    ConfigError,
    ExperimentConfig,
    execute,
    load_config,
    output_dir,
    parse_angle,
    preset,
    presets,
    sweep_points,
    write_record,
)


@pytest.fixture
def data_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("HEXMPO_DATA_DIR", str(tmp_path))
    return tmp_path


@pytest.mark.parametrize(
    "text,value",
    [("0.25pi", math.pi / 4), ("-pi/2", -math.pi / 2), ("pi", math.pi), ("1.2", 1.2),
     (0.7, 0.7), ("-0.5*pi", -math.pi / 2), ("3pi/4", 0.75 * math.pi), ("1e-1", 0.1), ("-pi", -math.pi), ("+pi/4", math.pi / 4)],
)
def test_parse_angle(text, value):
    assert parse_angle(text) == pytest.approx(value)


@pytest.mark.parametrize("text", ["", "abc", "pi pi", True, "inf", "-", "/2"])
def test_parse_angle_rejects(text):
    with pytest.raises(ConfigError):
        parse_angle(text)


def test_presets_validate():
    names = [n for n, _ in presets()]
    assert len(names) >= 9
    for name in names:
        cfg = preset(name)
        assert cfg.name == name
        assert sweep_points(cfg)
    assert {rc for _, rc in presets()} <= {"seconds", "minutes", "hours"}
    with pytest.raises(ConfigError):
        preset("nope")


BASE = {"name": "t", "engine": "exact", "geometry": "hex12", "theta_h": [0.3, "0.5pi"],
        "depths": [1, 2], "observable": {"kind": "z", "site": 3}}


@pytest.mark.parametrize(
    "patch,path",
    [
        ({"engine": "quantum"}, "engine"),
        ({"geometry": "square"}, "geometry"),
        ({"variant": "sideways"}, "variant"),
        ({"depths": [-1]}, "depths[0]"),
        ({"depths": []}, "depths"),
        ({"chi": [0]}, "chi[0]"),
        ({"theta_h": ["nonsense"]}, "theta_h[0]"),
        ({"observable": {"kind": "otoc", "site": 1}}, "observable.kind"),
        ({"observable": {"kind": "z", "site": 99}}, "observable.site"),
        ({"observable": {"kind": "z", "site": "weight17_site"}}, "observable.site"),
        ({"observable": {"kind": "pauli"}}, "observable.string"),
        ({"flux_bond": [0, 5]}, "flux_bond"),
        ({"bogus": 1}, "bogus"),
    ],
)
def test_config_errors_name_the_field(patch, path):
    raw = {**BASE, **patch}
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict(raw)
    assert err.value.path == path


def test_config_roundtrip_and_hash(tmp_path):
    cfg = ExperimentConfig.from_dict(BASE)
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()
    assert again.hash() == cfg.hash()
    assert ExperimentConfig.from_dict({**BASE, "out": "elsewhere", "workers": 3}).hash() == cfg.hash()
    assert ExperimentConfig.from_dict({**BASE, "depths": [1]}).hash() != cfg.hash()
    p = tmp_path / "c.json"
    p.write_text(json.dumps(BASE))
    assert load_config(p).hash() == cfg.hash()
    t = tmp_path / "c.toml"
    t.write_text('name = "t"\nengine = "exact"\ngeometry = "hex12"\ntheta_h = [0.3, "0.5pi"]\n'
                 'depths = [1, 2]\n[observable]\nkind = "z"\nsite = 3\n')
    assert load_config(t).hash() == cfg.hash()
    assert load_config("preset:clifford-endpoints").engine == "clifford"
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")


def test_execute_is_deterministic(data_dir):
    cfg = ExperimentConfig.from_dict(BASE)
    a, b = execute(cfg), execute(cfg)
    assert a.table() == b.table()
    values = {(r["theta_h"], r["depth"]): r["value"] for r in a.table() if r["quantity"] == "expectation"}
    assert values[(0.3, 1)] == pytest.approx(math.cos(0.3))
    jpath, cpath = write_record(a, output_dir(cfg))
    assert jpath.parent == data_dir / "t"
    rec = json.loads(jpath.read_text())
    assert rec["config"] == cfg.to_dict() and rec["config_hash"] == cfg.hash()
    rows = list(csv.DictReader(open(cpath)))
    assert len(rows) == len(a.table())


def test_parallel_matches_serial():
    cfg = ExperimentConfig.from_dict({**BASE, "engine": "mps", "chi": [8, 16]})
    serial = execute(cfg, workers=1)
    par = execute(cfg, workers=2)
    assert [p.point for p in par.points] == [p.point for p in serial.points]
    assert par.table() == serial.table()


def test_engines_agree_on_small_lattice():
    vals = {}
    for eng, extra in [("exact", {}), ("mps", {"chi": [64]}), ("heisenberg", {"chi": [256]})]:
        cfg = ExperimentConfig.from_dict({**BASE, "engine": eng, "theta_h": [0.7], **extra})
        rec = execute(cfg)
        assert not rec.failed, rec.failed[0].error if rec.failed else ""
        vals[eng] = [r["value"] for r in rec.table() if r["quantity"] == "expectation"]
    assert vals["mps"] == pytest.approx(vals["exact"], abs=1e-10)
    assert vals["heisenberg"] == pytest.approx(vals["exact"], abs=1e-10)


def test_cli_presets():
    r = CliRunner().invoke(main, ["presets"])
    assert r.exit_code == 0
    assert "fig5-double-slit" in r.output
    r = CliRunner().invoke(main, ["presets", "--show", "clifford-endpoints"])
    assert r.exit_code == 0 and json.loads(r.output)["engine"] == "clifford"


def test_cli_clifford_commands():
    r = CliRunner().invoke(main, ["clifford", "stabilizer", "--site", "weight17_site", "--depth", "5"])
    assert r.exit_code == 0, r.output
    assert "17" in r.output
    r = CliRunner().invoke(main, ["clifford", "lightcone", "--site", "62", "--depth", "7"])
    assert r.exit_code == 0 and "54" in r.output


def test_cli_run_config_file(tmp_path, data_dir):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(BASE))
    r = CliRunner().invoke(main, ["run", str(p), "--quiet"])
    assert r.exit_code == 0, r.output
    assert (data_dir / "t" / "t.json").exists()


def test_cli_config_error_exit(tmp_path, data_dir):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({**BASE, "engine": "quantum"}))
    r = CliRunner().invoke(main, ["run", str(p)])
    assert r.exit_code == EXIT_CONFIG
    r = CliRunner().invoke(main, ["exact", "run", "--geometry", "hex12", "--site", "nowhere"])
    assert r.exit_code == EXIT_CONFIG


def test_cli_partial_failure_exit(data_dir):
    # the dense engine cannot hold 127 qubits: every point fails but the record is written
    r = CliRunner().invoke(main, ["exact", "run", "--geometry", "eagle127", "--site", "62", "--depth", "1"])
    assert r.exit_code == EXIT_PARTIAL
    assert "TooLargeError" in r.output


def test_cli_bad_depth_is_usage_error():
    r = CliRunner().invoke(main, ["heisenberg", "run", "--depth", "x"])
    assert r.exit_code == 2 and "depth" in r.output.lower()


def test_cli_extrapolate(tmp_path):
    p = tmp_path / "t.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["chi", "F", "value"])
        for chi, F in [(16, 0.5), (32, 0.7), (64, 0.9)]:
            w.writerow([chi, F, 0.3 * math.log(F) + 0.8])
    r = CliRunner().invoke(main, ["extrapolate", str(p)])
    assert r.exit_code == 0
    assert json.loads(r.output)["extrapolated"] == pytest.approx(0.8)
    q = tmp_path / "bad.csv"
    q.write_text("chi,F,value\n16,0.5,0.1\n32,0.7,0.3\n64,0.9,0.2\n")
    r = CliRunner().invoke(main, ["extrapolate", str(q)])
    assert r.exit_code == 0 and json.loads(r.output.split("\n", 1)[1] if r.output.startswith("warning") else r.output)["extrapolated"] is None


def test_cli_double_slit_csv(tmp_path):
    out = tmp_path / "ds.csv"
    r = CliRunner().invoke(main, ["bptns", "double-slit", "--flux", "0,pi", "--depth", "2", "--chi", "8",
                                  "--out", str(out)])
    assert r.exit_code == 0, r.output
    rows = list(csv.DictReader(open(out)))
    assert {row["flux"] for row in rows} == {"0.0", str(math.pi)}
    assert (tmp_path / "ds.json").exists()
