import csv
import json
import math

import pytest

from hotent import cli
from hotent.validation import PairResult

FAST = ["--set", "horizon=3", "--set", "g=0.05", "--set", "theta=1"]


def _run(tmp_path, *argv):
    return cli.main([argv[0], "--out", str(tmp_path), *argv[1:]])


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_simulate_outputs(tmp_path):
    assert _run(tmp_path, "simulate", *FAST) == 0
    rows = _rows(tmp_path / "trajectory.csv")
    header = rows[0]
    assert header[:2] == ["t (1/omega)", "E_N (ebits)"]
    assert all("(" in h and h.endswith(")") for h in header)
    assert len(header) == 2 + 10 + 4
    # full double precision in the table
    assert rows[2][0] == format(float(rows[2][0]), ".17g")
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["config"]["horizon"] == 3
    assert summary["steady_state"]["status"] == "too_short"
    assert summary["floquet"]["+"]["growth_rate"] > 0


def test_simulate_deterministic_and_round_trip(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(a, "simulate", *FAST) == 0
    # rerun from the stored summary alone
    assert cli.main(["simulate", "--out", str(b), "--config", str(a / "summary.json")]) == 0
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()


def test_simulate_json_table(tmp_path):
    assert _run(tmp_path, "simulate", "--format", "json", *FAST) == 0
    records = json.loads((tmp_path / "trajectory.json").read_text())
    assert records[0]["t (1/omega)"] == 0.0


def test_exit_codes(tmp_path, capsys):
    assert _run(tmp_path, "simulate", "--set", "speed=1") == 2
    assert _run(tmp_path, "simulate", "--set", "g=-1") == 2
    assert _run(tmp_path, "units", "--theta", "1") == 2
    assert _run(tmp_path, "boundary") == 2
    assert _run(tmp_path, "exponent", "--axis", "kappa1=0:0.5:3") == 2
    # undamped resonance: tables are still written, then exit 3
    assert _run(tmp_path, "simulate", "--set", "g=0", "--set", "horizon=120") == 3
    assert json.loads((tmp_path / "summary.json").read_text())["steady_state"]["status"] == "diverged"
    assert "error:" in capsys.readouterr().err


def test_oracle_mismatch_exit_code(tmp_path, monkeypatch):
    bad = PairResult("exact-bath", "max abs elementwise", 0.5, 0.01, True, False, {})
    skipped = PairResult("qme-classical", "x", 0.5, 0.01, False, False, {})
    monkeypatch.setattr(cli, "oracle_triangle", lambda *a, **k: [bad, skipped])
    assert _run(tmp_path, "oracle-compare") == 4
    doc = json.loads((tmp_path / "oracle_compare.json").read_text())
    assert doc["mismatches"] == ["exact-bath"]
    monkeypatch.setattr(cli, "oracle_triangle", lambda *a, **k: [skipped])
    assert _run(tmp_path, "oracle-compare") == 0


def test_exponent_command(tmp_path):
    assert _run(tmp_path, "exponent", "--axis", "kappa1=0:0.4:3", "--axis", "delta=1.9:2.1:3") == 0
    rows = _rows(tmp_path / "exponent.csv")
    assert len(rows) == 1 + 9
    for r in rows[1:4]:
        assert float(r[2]) == 0.0 and r[4] == "true"


def test_equilibrium_command(tmp_path):
    assert _run(tmp_path, "equilibrium", "--axis", "theta=0.1:2:4", "--axis", "kappa0=0:0.5:2") == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["config"]["kappa1"] == 0.0
    bound = {b["kappa0"]: b["theta_boundary"] for b in summary["boundary"]}
    assert bound[0.0] == 0.0 and 0 < bound[0.5] < 1


def test_boundary_command(tmp_path):
    assert _run(tmp_path, "boundary", "--set", "g=0.05", "--set", "horizon=20",
                "--axis", "kappa1=0.4:0.5:2", "--depth", "3") == 0
    rows = _rows(tmp_path / "boundary.csv")
    assert rows[0][2] == "theta_sim (hbar omega/k)"
    assert len(rows) == 3
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["points_in_tongue"] == 2


def test_units_command(tmp_path, capsys):
    assert _run(tmp_path, "units", "--frequency", "21e9", "--theta", "50") == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["temperature_k"] == pytest.approx(50.392, rel=1e-4)
    assert (tmp_path / "units.csv").exists()
    assert math.isclose(json.loads((tmp_path / "units.json").read_text())["theta"], 50.0)
