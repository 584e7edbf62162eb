import copy
import hashlib
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from desatlqr import cli
from desatlqr.config import reference_config_dict
from desatlqr.errors import ResidualError
from desatlqr.lqr_core import GainSchedule, periodic_riccati
from desatlqr.sim_engine import CSV_HEADER, Trajectory

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _write_config(path, **overrides):
    doc = copy.deepcopy(reference_config_dict())
    for dotted, value in overrides.items():
        sec, key = dotted.split("__")
        if value is None:
            doc[sec].pop(key, None)
        else:
            doc.setdefault(sec, {})[key] = value
    path.write_text(yaml.safe_dump(doc))
    return str(path)


def _md5(path):
    return hashlib.md5(Path(path).read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def designed(tmp_path_factory):
    out = tmp_path_factory.mktemp("design")
    rc = cli.main(["design", "--config", str(CONFIGS / "reference.yaml"), "--out", str(out)])
    assert rc == cli.EXIT_OK
    return out


def test_design_outputs(designed):
    assert (designed / "schedule.json").exists()
    report = json.loads((designed / "design_report.json").read_text())
    assert report["monodromy_spectral_radius"] < 1
    assert report["riccati_residual_max"] <= 1e-6
    assert report["gramian_rank"] == 9
    assert report["p"] == 100
    assert report["path"].startswith("periodic Riccati")


def test_design_constant_field_fast_path(tmp_path):
    rc = cli.main(["design", "--config", str(CONFIGS / "constant_field.yaml"), "--out", str(tmp_path)])
    assert rc == 0
    report = json.loads((tmp_path / "design_report.json").read_text())
    assert report["path"] == "constant-B DARE fast path"
    assert report["monodromy_spectral_radius"] < 1


def test_missing_wheel_inertia_is_validation_error(tmp_path, capsys):
    cfg = _write_config(tmp_path / "c.yaml", spacecraft__J_w=None)
    rc = cli.main(["design", "--config", cfg, "--out", str(tmp_path)])
    assert rc == cli.EXIT_VALIDATION
    assert "spacecraft.J_w" in capsys.readouterr().err


def test_round_trip_verify(designed, capsys):
    rc = cli.main(["verify", "--config", str(CONFIGS / "reference.yaml"), "--schedule", str(designed / "schedule.json")])
    out = capsys.readouterr().out
    assert rc == cli.EXIT_OK
    assert "FAIL" not in out
    assert "PASS value_iteration" in out


def test_serialization_is_full_precision(designed, ref_plant):
    loaded = GainSchedule.from_json(str(designed / "schedule.json"))
    fresh = periodic_riccati(ref_plant)
    for a, b in zip(loaded.P, fresh.P):
        assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(b))
    again = GainSchedule.from_json(loaded.to_json())
    for a, b in zip(again.P, loaded.P):
        np.testing.assert_array_equal(a, b)


def test_verify_detects_perturbed_schedule(designed, tmp_path, capsys):
    d = json.loads((designed / "schedule.json").read_text())
    d["P"][40] = (1.01 * np.array(d["P"][40])).tolist()
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(d))
    rc = cli.main(["verify", "--config", str(CONFIGS / "reference.yaml"), "--schedule", str(bad), "--no-oracle"])
    assert rc == cli.EXIT_VERIFY_FAILED
    assert "FAIL riccati_residual" in capsys.readouterr().out


def test_period_mismatch_fails_fast(designed, tmp_path, capsys):
    cfg = _write_config(tmp_path / "p50.yaml", design__p=50)
    rc = cli.main(["verify", "--config", cfg, "--schedule", str(designed / "schedule.json")])
    assert rc == cli.EXIT_VALIDATION
    assert "p" in capsys.readouterr().err
    rc = cli.main(["simulate", "--config", cfg, "--schedule", str(designed / "schedule.json"), "--out", str(tmp_path)])
    assert rc == cli.EXIT_VALIDATION


def test_simulate_linear_decays(designed, tmp_path):
    rc = cli.main(["simulate", "--config", str(CONFIGS / "reference.yaml"),
                   "--schedule", str(designed / "schedule.json"), "--out", str(tmp_path)])
    assert rc == 0
    tr = Trajectory.from_csv(tmp_path / "trajectory.csv")
    assert len(tr) == 1001
    last_orbit = np.linalg.norm(tr.x[-100:], axis=1)
    assert np.all(last_orbit <= 0.01 * np.linalg.norm(tr.x[0]))


def test_simulate_nonlinear_deterministic(designed, tmp_path):
    cfg = _write_config(tmp_path / "nl.yaml", simulation__mode="nonlinear", simulation__duration=0.2,
                        simulation__ic_scale=10.0, simulation__ic_half_width=0.5)
    hashes = []
    for run in ("a", "b"):
        out = tmp_path / run
        rc = cli.main(["simulate", "--config", cfg, "--schedule", str(designed / "schedule.json"),
                       "--out", str(out), "--seed", "5"])
        assert rc == 0
        hashes.append(_md5(out / "trajectory.csv"))
    assert hashes[0] == hashes[1]


def test_simulate_zero_duration(designed, tmp_path):
    cfg = _write_config(tmp_path / "z.yaml", simulation__duration=0)
    rc = cli.main(["simulate", "--config", cfg, "--schedule", str(designed / "schedule.json"), "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 2


def test_plot_outputs_and_determinism(designed, tmp_path):
    cli.main(["simulate", "--config", str(CONFIGS / "reference.yaml"),
              "--schedule", str(designed / "schedule.json"), "--out", str(tmp_path)])
    csv = str(tmp_path / "trajectory.csv")
    digests = []
    for run in ("a", "b"):
        assert cli.main(["plot", csv, "--out", str(tmp_path / run)]) == 0
        names = sorted(p.name for p in (tmp_path / run).iterdir())
        assert names == ["attitude.svg", "rates.svg", "wheels.svg"]
        digests.append([_md5(tmp_path / run / n) for n in names])
    assert digests[0] == digests[1]
    assert "body rate (rad/s)" in (tmp_path / "a" / "rates.svg").read_text()
    assert "wheel speed (rad/s)" in (tmp_path / "a" / "wheels.svg").read_text()
    assert "time (s)" in (tmp_path / "a" / "attitude.svg").read_text()


def test_plot_header_only_is_error(tmp_path, capsys):
    p = tmp_path / "h.csv"
    p.write_text(",".join(CSV_HEADER) + "\n")
    rc = cli.main(["plot", str(p), "--out", str(tmp_path)])
    assert rc == cli.EXIT_IO
    assert "line 2" in capsys.readouterr().err
    assert not (tmp_path / "rates.svg").exists()


def test_plot_malformed_row_reports_line(tmp_path, capsys):
    p = tmp_path / "m.csv"
    p.write_text(",".join(CSV_HEADER) + "\n" + ",".join(["0"] * 19) + "\n" + "1,2,3\n")
    assert cli.main(["plot", str(p), "--out", str(tmp_path)]) == cli.EXIT_IO
    assert "line 3" in capsys.readouterr().err


def test_plot_single_row(tmp_path):
    p = tmp_path / "one.csv"
    p.write_text(",".join(CSV_HEADER) + "\n" + ",".join(["0.5"] * 19) + "\n")
    assert cli.main(["plot", str(p), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "wheels.svg").stat().st_size > 0


def test_io_errors(tmp_path):
    assert cli.main(["design", "--config", str(tmp_path / "none.yaml")]) == cli.EXIT_IO
    bad = tmp_path / "s.json"
    bad.write_text("{oops")
    rc = cli.main(["verify", "--config", str(CONFIGS / "reference.yaml"), "--schedule", str(bad)])
    assert rc == cli.EXIT_IO


def test_solver_failure_exit_code(tmp_path, monkeypatch, capsys):
    def fail(*a, **k):
        raise ResidualError("Riccati residual 1e-3 at k=0 exceeds 1e-06")

    monkeypatch.setattr(cli, "periodic_riccati", fail)
    rc = cli.main(["design", "--config", str(CONFIGS / "reference.yaml"), "--out", str(tmp_path)])
    assert rc == cli.EXIT_SOLVER
    assert "ResidualError" in capsys.readouterr().err


def test_exit_codes_distinct():
    codes = {cli.EXIT_OK, cli.EXIT_VERIFY_FAILED, cli.EXIT_VALIDATION, cli.EXIT_SOLVER, cli.EXIT_IO}
    assert len(codes) == 5


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "desatlqr", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for sub in ("design", "simulate", "plot", "verify"):
        assert sub in r.stdout
