import json
import math

import pytest

from civsim.calibration import LatencyCalibration, data_path
from civsim.harness import cli
from civsim.harness.commands import cmd_fit_calibration, cmd_run
from civsim.harness.fit import Infeasible, fit_calibration, load_bounds, load_targets, Target
from civsim.harness.reports import Report

SCENARIO = {"schema": "civsim.scenario/1", "caller": "sip-a", "callee": "sip-b", "repeat": 3, "seed": 9}


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "sc.json"
    path.write_text(json.dumps(SCENARIO))
    return path


def test_run_report_round_trip(scenario_file, tmp_path):
    rep = cmd_run(scenario_file, output_path=tmp_path / "out")
    csv_text = (tmp_path / "out.csv").read_text()
    json_text = (tmp_path / "out.json").read_text()
    assert Report.from_csv("run", csv_text).to_csv() == csv_text
    assert Report.from_json(json_text).to_json() == json_text
    assert rep.rows[-1]["row"] == "average"
    assert (tmp_path / "out.trace.jsonl").read_text().startswith("run=0 ")


def test_fixed_seed_single_row(scenario_file):
    sc = json.loads(scenario_file.read_text())
    sc["repeat"] = 1
    scenario_file.write_text(json.dumps(sc))
    a, b = cmd_run(scenario_file), cmd_run(scenario_file)
    assert a.to_csv() == b.to_csv()
    assert len(a.rows) == 2  # the run and its average


def test_repeat_average_near_measured_total(tmp_path):
    path = tmp_path / "sc.json"
    path.write_text(json.dumps({**SCENARIO, "repeat": 15}))
    rep = cmd_run(path)
    avg = rep.rows[-1]
    assert avg["total_ms"] == pytest.approx(4700, rel=0.05)
    assert avg["success_rate"] == 1.0


def test_run_jobs_matches_serial(scenario_file):
    assert cmd_run(scenario_file, jobs=2).to_csv() == cmd_run(scenario_file).to_csv()


def test_infeasible_target(topology):
    bounds = load_bounds(data_path("bounds.json"))
    with pytest.raises(Infeasible):
        fit_calibration(topology, [Target("too fast", "landline-a", "landline-b", 500.0)], bounds)


def test_shipped_calibration_is_the_fit(tmp_path):
    out = tmp_path / "cal.json"
    cmd_fit_calibration(output_path=out)
    first = out.read_text()
    cmd_fit_calibration(output_path=out)
    assert out.read_text() == first
    assert LatencyCalibration.load(out).to_dict() == LatencyCalibration.load(data_path("calibration.json")).to_dict()
    rows = json.loads((tmp_path / "cal-residuals.json").read_text())["rows"]
    assert len(rows) == len(load_targets(data_path("targets.json")))
    assert all(r[-1] <= 0.05 for r in rows)


def test_calibration_durations_non_negative(calibration):
    assert all(v >= 0 for k, v in calibration.values.items())
    assert not math.isinf(calibration.noise_snr_db)


def test_cli_exit_codes(tmp_path, scenario_file, capsys):
    assert cli.main(["run", str(scenario_file), "--out", str(tmp_path / "r")]) == 0
    assert cli.main(["run", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**SCENARIO, "n": 0}))
    assert cli.main(["run", str(bad)]) == 2
    targets = tmp_path / "t.json"
    targets.write_text(json.dumps({"schema": "civsim.targets/1", "targets": [
        {"name": "x", "caller": "landline-a", "callee": "landline-b", "total_ms": 10}]}))
    assert cli.main(["fit-calibration", "--targets", str(targets)]) == 3
    assert cli.main(["sweep-n", "--n", "0-3"]) == 2
    assert cli.main(["attack", "downgrade", "--trials", "5"]) == 0
    out = capsys.readouterr().out
    assert "downgrade,5," in out


def test_cli_sweep_markspace_writes_report(tmp_path):
    assert cli.main(["sweep-markspace", "--marks", "60", "--spaces", "100", "--trials", "20",
                     "--out", str(tmp_path / "ms")]) == 0
    rep = Report.from_json((tmp_path / "ms.json").read_text())
    assert rep.rows[0]["successes"] == 20


def test_report_rejects_control_characters():
    with pytest.raises(ValueError):
        Report("attack").add(strategy="a\rb")
