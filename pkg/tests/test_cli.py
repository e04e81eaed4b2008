import json
import math
import subprocess
import sys

import pytest

from tcsim.cli import main
from tcsim.export import load_map
from tcsim.mapfilter import TRAVERSABILITY
from tcsim.scenario import bundled

FLAT = str(bundled("flat_field"))
TRIAL = str(bundled("field_trial"))
OUTPUTS = ["mission_log.jsonl", "summary.json", "ugv_trajectory.csv", "uav_trajectory.csv"]


@pytest.fixture(scope="module")
def flat_runs(tmp_path_factory):
    dirs = [tmp_path_factory.mktemp(f"run{i}") for i in range(2)]
    codes = [main(["run", "--scenario", FLAT, "--out", str(d), "--export-svg", "--quiet"]) for d in dirs]
    return codes, dirs


def test_run_done_exits_zero(flat_runs):
    codes, dirs = flat_runs
    assert codes == [0, 0]
    summary = json.loads((dirs[0] / "summary.json").read_text())
    assert summary["outcome"] == "Done"
    assert (dirs[0] / "top_view.svg").read_text().startswith("<svg")
    lines = (dirs[0] / "mission_log.jsonl").read_text().splitlines()
    assert len(lines) == summary["ticks"]
    assert json.loads(lines[-1])["outcome"] == "Done"
    header = (dirs[0] / "ugv_trajectory.csv").read_text().splitlines()[0]
    assert header == "tick,x,y,cost"


def test_rerun_is_byte_identical(flat_runs):
    _, (a, b) = flat_runs
    for name in OUTPUTS + ["top_view.svg"]:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    for f in sorted((a / "maps").iterdir()):
        assert f.read_bytes() == (b / "maps" / f.name).read_bytes(), f.name


def test_saved_mission_map_reloads(flat_runs):
    _, (a, _) = flat_runs
    gmap = load_map(a / "maps")
    assert TRAVERSABILITY in gmap


def test_failed_mission_exits_nonzero(tmp_path):
    assert main(["run", "--scenario", FLAT, "--out", str(tmp_path), "--max-ticks", "5", "--quiet"]) == 1
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["outcome"] == "Failed" and summary["reason"] == "max-ticks"


def test_seed_override_recorded(tmp_path):
    main(["run", "--scenario", FLAT, "--out", str(tmp_path), "--max-ticks", "3", "--seed", "99", "--quiet"])
    assert json.loads((tmp_path / "summary.json").read_text())["seed"] == 99


def test_filter_then_plan_on_saved_map(tmp_path):
    assert main(["filter", "--scenario", TRIAL, "--out", str(tmp_path), "--quiet"]) == 0
    maps = tmp_path / "maps"
    assert TRAVERSABILITY in load_map(maps)
    out = tmp_path / "plan"
    assert main(["plan", "--scenario", TRIAL, "--out", str(out), "--map", str(maps),
                 "--start", "1,3.05", "--goal", "4.5,3.05", "--quiet"]) == 0
    plan = json.loads((out / "plan.json").read_text())
    assert plan["path"]["cost"] > 0
    rows = (out / "plan.csv").read_text().splitlines()
    assert rows[0] == "x,y" and len(rows) == len(plan["path"]["cells"]) + 1


def test_detect_cliff_on_field_trial(tmp_path, capsys):
    assert main(["detect-cliff", "--scenario", TRIAL, "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "cliff.json").read_text())
    assert res["cliff"] is True
    assert "cliff=True" in capsys.readouterr().out


def test_detect_anchor_finds_pole(tmp_path):
    assert main(["detect-anchor", "--scenario", TRIAL, "--out", str(tmp_path), "--quiet"]) == 0
    res = json.loads((tmp_path / "anchor.json").read_text())
    assert math.dist(res["anchor"]["xy"], (7.55, 3.05)) <= 0.1


def test_detect_anchor_none_exits_one(tmp_path):
    assert main(["detect-anchor", "--scenario", FLAT, "--out", str(tmp_path), "--quiet"]) == 1
    assert json.loads((tmp_path / "anchor.json").read_text())["anchor"] is None


def test_bad_scenario_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"world": {"terrain": {"size": [1, 1], "resolution": -1}},
                               "goal": [0.5, 0.5], "ugv": {"start": [0.1, 0.1]}}))
    assert main(["run", "--scenario", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "world.terrain.resolution" in capsys.readouterr().err
    assert main(["run", "--scenario", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "tcsim.cli", "detect-cliff", "--scenario", TRIAL,
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("cliff=True")
