import csv
import json

import pytest

from subkernel import cli, presets
from subkernel.errors import ConfigError

SMALL = {
    "name": "small",
    "space": {"kind": "lattice", "dim": 1, "side": 257},
    "base": {"kind": "averaged"},
    "bernstein": {"kind": "stable", "alpha": 0.5},
    "n_max": 16,
    "grids": {"times": [1, 2, 4, 8, 16], "radii": [1, 2, 4, 8], "centers": "center", "d_max": 32},
    "suites": ["weights", "tails", "dheat"],
}


def _write(tmp_path, cfg):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def test_presets_validate():
    assert len(presets.names()) >= 4
    for name in presets.names():
        cfg = cli.ExperimentConfig.from_dict(presets.get(name))
        assert cfg.name == name
    a = presets.get("z1-stable-05")
    a["n_max"] = 1
    assert presets.get("z1-stable-05")["n_max"] == 128


def test_list_presets(capsys):
    assert cli.main(["list-presets"]) == 0
    out = capsys.readouterr().out.split()
    assert "z1-stable-05" in out and "identity-sanity" in out


def test_weights_command(capsys):
    assert cli.main(["weights", "--bernstein", "stable:0.5", "--k", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "k,c"
    assert float(lines[1].split(",")[1]) == pytest.approx(0.5)
    assert float(lines[2].split(",")[1]) == pytest.approx(0.125)
    assert cli.main(["weights", "--bernstein", "stable:x", "--k", "3"]) == 2
    assert cli.main(["weights", "--bernstein", "stable:0.5", "--k", "0"]) == 2


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="line 1 column"):
        cli.parse_config("{bad json", str(tmp_path))
    bad = dict(SMALL, suites=["nope"])
    with pytest.raises(ConfigError):
        cli.ExperimentConfig.from_dict(bad)
    with pytest.raises(ConfigError):
        cli.ExperimentConfig.from_dict({k: v for k, v in SMALL.items() if k != "n_max"})
    with pytest.raises(ConfigError):
        cli.ExperimentConfig.from_dict(dict(SMALL, n_max=4))
    with pytest.raises(ConfigError):
        cli.ExperimentConfig.from_dict(dict(SMALL, extra=1))
    assert cli.main(["run", _write(tmp_path, bad), "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["run", "no-such-preset"]) == 2


def test_run_outputs_and_determinism(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL)
    o1, o2 = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", cfg, "--out", str(o1), "--threads", "1"]) == 0
    assert cli.main(["run", cfg, "--out", str(o2), "--seed", "0"]) == 0
    assert (o1 / "report.json").read_bytes() == (o2 / "report.json").read_bytes()
    rep = json.loads((o1 / "report.json").read_text())
    assert rep["pass"] and set(rep["suites"]) == set(SMALL["suites"])
    with open(o1 / "dheat.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == cli.CSV_COLUMNS and len(rows) > 1
    assert all(r[0] == "dheat" for r in rows[1:])
    assert (o1 / "dheat.svg").read_text().startswith("<svg")


def test_failing_suite_exits_one(tmp_path):
    cfg = dict(SMALL, name="fail", bernstein={"kind": "identity"}, suites=["dheat"])
    assert cli.main(["run", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 1
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["suites"]["dheat"]["pass"] is False
