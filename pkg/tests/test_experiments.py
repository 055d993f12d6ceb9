import csv
import hashlib
import json
import time

import numpy as np
import pytest

from bargmann_fpo.cli import main
from bargmann_fpo.continuum import PoleEstimate
from bargmann_fpo.errors import ConfigError
from bargmann_fpo.experiments import (
    PRESETS, compare_report, config_from_text, load_config, run_experiment,
)

GOOD = """
[experiment]
name = custom_poles
task = poles

[potential]
a1 = -0.1
a2 = -2
b1 = 1
b2 = 2

[continuum]
r_cut = 5

[lattice]
a = 0.01

[search]
region = 0, 20, -5, 0
grid = 61, 21
methods = determinant, transcendental
"""


def test_config_round_trip():
    cfg = config_from_text(GOOD)
    assert cfg.task == "poles"
    assert cfg.region == (0.0, 20.0, -5.0, 0.0)
    assert cfg.grid == (61, 21)
    assert cfg.methods == ("determinant", "transcendental")
    assert cfg.spec.resonance_params == ((-0.1, -2.0),)


def test_preset_section_inherits():
    cfg = config_from_text("[experiment]\npreset = fig9\n[sweep]\nstep = 0.05\n")
    assert cfg.params["b2"] == 0.14
    assert cfg.sweep == (0.5, 7.0, 0.05)
    assert cfg.task == "trajectories"


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_validate(name):
    cfg = PRESETS[name]
    assert cfg.a == 0.01
    assert cfg.spec is not None
    if cfg.task == "trajectories":
        assert cfg.sweep == (0.5, 7.0, 0.01)
        assert len(cfg.R_values) == 651


@pytest.mark.parametrize("text, fragment", [
    (GOOD.replace("a1 = -0.1", "a1 = 0.1"), "a2 < a1 < 0"),
    (GOOD.replace("task = poles", "task = plot"), "unknown task"),
    (GOOD.replace("grid = 61, 21", "grid = 61"), "grid"),
    (GOOD.replace("grid = 61, 21", "grid = 61.5, 21"), "integers"),
    (GOOD.replace("a = 0.01", "a = 0.03"), "multiple"),
    (GOOD.replace("0, 20, -5, 0", "0, 20, -5, 1"), "region"),
    (GOOD.replace("transcendental\n", "guess\n"), "unknown methods"),
    (GOOD + "[sweep]\nstep = fast\n", "sweep"),
    ("[experiment]\npreset = fig42\n", "unknown preset"),
])
def test_bad_configs_fail_fast(text, fragment):
    t0 = time.perf_counter()
    with pytest.raises(ConfigError, match=fragment):
        config_from_text(text)
    assert time.perf_counter() - t0 < 1.0


def test_load_config_reports_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")


def _pole(E, method="determinant"):
    return PoleEstimate(complex(E), method, 0.0)


def test_identical_pole_sets_have_zero_discrepancy():
    poles = [_pole(4 - 0.4j), _pole(10 - 3j)]
    report = compare_report([("determinant", poles), ("transcendental", poles)])
    assert report.max_relative() == 0.0
    assert report.unmatched == []


def test_compare_lists_unmatched_poles():
    a = [_pole(4 - 0.4j), _pole(50 - 10j)]
    b = [_pole(4.01 - 0.4j), _pole(200 - 1j)]
    report = compare_report([("determinant", a), ("transcendental", b)])
    assert len(report.pairs) == 1
    assert sorted(m for m, _ in report.unmatched) == ["determinant", "transcendental"]
    with pytest.raises(ValueError):
        compare_report([("determinant", a)])


def test_fixed_points_are_matched_on_position():
    det = [_pole(4 - 0.4j), _pole(5 - 4j)]
    fp = [_pole(3.95 - 0.41j, "fixed_point")]
    report = compare_report([("determinant", det), ("fixed_point", fp)])
    (pair,) = report.pairs
    assert pair.energy_a == 4 - 0.4j
    assert pair.position_relative == pytest.approx(0.0125)


def _digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_poles_run_is_deterministic(tmp_path):
    cfg = config_from_text(GOOD)
    digests = []
    for n in range(2):
        out = tmp_path / f"run{n}"
        manifest = run_experiment(cfg.with_overrides(out_dir=str(out)))
        digests.append({name: _digest(out / name) for name in manifest["artifacts"]})
    assert digests[0] == digests[1]
    assert set(digests[0]) == {"poles.csv", "comparison.csv"}
    with open(tmp_path / "run0" / "poles.csv") as fh:
        rows = list(csv.DictReader(fh))
    E = np.array([complex(float(r["re_E"]), float(r["im_E"])) for r in rows])
    assert np.min(np.abs(E - (3.99 - 0.4j))) < 0.04
    manifest = json.loads((tmp_path / "run0" / "manifest.json").read_text())
    assert {"config", "versions", "timings", "artifacts"} <= set(manifest)


def test_cli_potential_verb(tmp_path, capsys):
    assert main(["potential", "--preset", "fig3", "--out-dir", str(tmp_path)]) == 0
    with open(tmp_path / "potential.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["r", "V"]
    assert len(rows) == 501
    assert json.loads(capsys.readouterr().out)["artifacts"] == ["potential.csv"]


def test_cli_config_error_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text(GOOD.replace("a1 = -0.1", "a1 = 0.1"))
    assert main(["poles", "--config", str(path)]) == 2
    assert "a2 < a1 < 0" in capsys.readouterr().err


def test_cli_overrides(tmp_path):
    path = tmp_path / "cfg.ini"
    path.write_text(GOOD)
    out = tmp_path / "out"
    code = main(["poles", "--config", str(path), "--out-dir", str(out), "--grid", "41,15",
                 "--method", "determinant", "--rcut", "4"])
    assert code == 0
    config = json.loads((out / "manifest.json").read_text())["config"]
    assert config["grid"] == [41, 15]
    assert config["methods"] == ["determinant"]
    assert config["R_cut"] == 4.0


def test_cli_requires_a_source():
    with pytest.raises(SystemExit):
        main(["poles"])
    with pytest.raises(SystemExit):
        main(["poles", "--preset", "fig3", "--config", "x.ini"])
