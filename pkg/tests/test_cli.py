import csv
import json
from pathlib import Path

import pytest

from bundleheat import __version__
from bundleheat.cli import main
from bundleheat.config import load_config, parse_config
from bundleheat.errors import ConfigError
from bundleheat.experiments import run_experiment
from bundleheat.report import report_dict, version_string, write_report

CONFIGS = Path(__file__).resolve().parent.parent / "examples_configs"

BASE = """
[geometry]
id = "half_space"
dimension = 1

[bundle]
id = "scalar"
robin = 1.0

[run]
{run}

[experiment]
quantity = "semigroup"
x = [0.5]
t = [0.5]
section = {{ constant = [1.0] }}
expect = [0.8]
"""


def _write(tmp_path, run="dt = 1e-2\npaths = 2048\nseed = 1\nthreads = 1"):
    path = tmp_path / "exp.toml"
    path.write_text(BASE.format(run=run))
    return path


def test_missing_dt_exits_2(tmp_path, capsys):
    path = _write(tmp_path, run="paths = 1000")
    assert main(["run", str(path), "--out", str(tmp_path / "out")]) == 2
    assert "missing key: dt" in capsys.readouterr().err


def test_missing_file_and_unknown_keys(tmp_path):
    assert main(["run", str(tmp_path / "nope.toml")]) == 2
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config({"geometry": {"id": "half_space"}, "bundle": {"id": "scalar"},
                      "run": {"dt": 0.1, "paths": 100, "speed": 3}})
    with pytest.raises(ConfigError, match="missing table"):
        parse_config({"geometry": {"id": "half_space"}})
    with pytest.raises(ConfigError):
        parse_config({"geometry": {"id": "klein_bottle"}, "bundle": {"id": "scalar"}, "run": {"dt": 0.1, "paths": 100}})


def test_run_writes_reports_and_is_deterministic(tmp_path, capsys):
    path = _write(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    code = main(["run", str(path), "--out", str(out1), "--seed", "4"])
    assert code in (0, 1)
    assert main(["run", "--config", str(path), "--out", str(out2), "--seed", "4"]) == code
    j1 = json.loads((out1 / "semigroup.json").read_text())
    j2 = json.loads((out2 / "semigroup.json").read_text())
    j1.pop("timestamp"), j2.pop("timestamp")
    assert j1 == j2
    assert j1["config"]["run"]["seed"] == 4
    assert j1["version"].startswith(__version__)
    with open(out1 / "semigroup.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["quantity"] == "semigroup" and rows[0]["geometry"] == "half_space"
    assert set(rows[0]) >= {"t", "x", "value_0", "se_0", "n", "seed", "scheme", "dt"}


def test_failed_assertion_exits_1(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text(BASE.format(run="dt = 1e-2\npaths = 2048\nthreads = 1").replace("expect = [0.8]", "expect = [0.1]"))
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 1


def test_json_bytes_identical_modulo_timestamp(tmp_path):
    cfg = load_config(_write(tmp_path))
    r1 = run_experiment(cfg)
    r2 = run_experiment(cfg)
    d1 = json.dumps(report_dict(r1, timestamp="T"), sort_keys=True)
    d2 = json.dumps(report_dict(r2, timestamp="T"), sort_keys=True)
    assert d1 == d2


def test_overrides_and_quick(tmp_path):
    cfg = load_config(_write(tmp_path)).with_overrides(paths=4096, dt=None, scheme="overshoot")
    assert cfg.ensemble.paths == 4096 and cfg.ensemble.scheme == "overshoot" and cfg.ensemble.dt == 1e-2
    assert cfg.raw["run"]["paths"] == 4096


@pytest.mark.parametrize("name", ["conservation_halfplane.toml", "localtime_disk.toml"])
def test_example_configs_parse_and_run(tmp_path, name):
    cfg = load_config(CONFIGS / name).with_overrides(paths=8192, dt=1e-2, threads=1)
    report = run_experiment(cfg)
    csv_path, json_path = write_report(report, tmp_path)
    assert csv_path.exists() and json_path.exists()
    assert report.passed


def test_all_example_configs_parse():
    for path in sorted(CONFIGS.glob("*.toml")):
        load_config(path)


def test_subcommand_overrides_quantity(tmp_path):
    path = _write(tmp_path)
    assert main(["kernel", str(path), "--out", str(tmp_path / "o")]) == 2  # no window for a kernel run


def test_version_string():
    assert version_string().startswith(__version__)


def test_validate_subset(capsys):
    assert main(["validate", "--quick", "--only", "4", "12"]) == 0
    out = capsys.readouterr().out
    assert "criterion  4" in out and "criterion 12" in out and "oracle check" in out
