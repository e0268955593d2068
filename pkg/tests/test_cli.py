import csv
import subprocess
import sys

import pytest

from safeplan import scenario as sc
from safeplan.cli import main
from safeplan.errors import ConfigError

QUICK_RRT = """\
map.source = single_obstacle
obstacle.0.center = 10, 10
obstacle.0.radii = 1, 8
planner.kind = rrt
planner.max_samples = 60
start.position = 3, 3
goal.position = 4, 4
"""

QUICK_IIG = """\
map.source = cave_like
obstacles.mode = extract
planner.kind = safe-iig
planner.n_ric = 3
planner.delta_ric = 1.0
planner.max_samples = 60
start.position = 2, 2
"""


def _cfg(tmp_path, text, name="s.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_bundled_scenarios_validate(capsys):
    assert set(sc.bundled_names()) >= {"single_obstacle", "cave_like"}
    for name in sc.bundled_names():
        assert main(["validate", name]) == 0
    assert "ok" in capsys.readouterr().out


def test_validate_reports_every_finding(tmp_path, capsys):
    path = _cfg(tmp_path, "lip.com_height = -0.6\nlimits.l_min = 0.9\nbogus.key = 1\n")
    assert main(["validate", path]) == 2
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 3
    assert any(line.startswith("lip.com_height:") for line in out)
    assert any(line.startswith("limits.l_min:") for line in out)
    assert any(line.startswith("bogus.key:") for line in out)


def test_validate_missing_map_file(tmp_path, capsys):
    path = _cfg(tmp_path, "map.source = file\nmap.file = nowhere.txt\n")
    assert main(["validate", path]) == 2
    out = capsys.readouterr().out
    assert "map.file" in out and "nowhere.txt" in out


def test_parse_errors():
    with pytest.raises(ConfigError, match="line 2"):
        sc.parse_text("a = 1\nnot a pair\n")
    assert sc.parse_text("# c\nx = 1 # trailing\nx = 2\n") == {"x": "2"}
    _, findings = sc.resolve({"planner.n_ric": "many"})
    assert findings and findings[0].key == "planner.n_ric"
    _, findings = sc.resolve({"obstacle.0.radii": "1, 2"})
    assert [f.key for f in findings] == ["obstacle.0.center"]


def test_run_negative_height(tmp_path, capsys):
    path = _cfg(tmp_path, QUICK_RRT + "lip.com_height = -0.6\n")
    assert main(["run", path, "--out", str(tmp_path / "o")]) == 2
    assert "lip.com_height" in capsys.readouterr().err


def test_run_missing_scenario(tmp_path):
    assert main(["run", str(tmp_path / "nope.cfg")]) == 4


def test_run_planning_failure_exit_code(tmp_path):
    path = _cfg(tmp_path, QUICK_RRT + "goal.position = 20, 20\nplanner.max_samples = 5\n")
    out = tmp_path / "o"
    assert main(["run", path, "--out", str(out)]) == 3
    assert (out / "tree.csv").is_file() and not (out / "path.csv").exists()


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _assert_round_trips(cell):
    if cell in ("", "left", "right"):
        return
    try:
        int(cell)
        return
    except ValueError:
        assert repr(float(cell)) == cell


def test_run_rrt_artifacts(tmp_path, capsys):
    path = _cfg(tmp_path, QUICK_RRT)
    out = tmp_path / "o"
    assert main(["run", path, "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"config.cfg", "tree.csv", "ric.csv", "barrier.csv", "path.csv",
            "tracking_open_loop.csv", "tracking_closed_loop.csv"} <= names
    assert _rows(out / "path.csv")[0][:3] == ["k", "x", "xdot"]
    for f in out.glob("*.csv"):
        for row in _rows(f)[1:]:
            for cell in row:
                _assert_round_trips(cell)
    track = _rows(out / "tracking_closed_loop.csv")
    assert max(float(r[7]) for r in track[1:]) < 1e-9
    assert "closed_loop: max position error" in capsys.readouterr().out


def test_seed_determinism_and_config_echo(tmp_path):
    path = _cfg(tmp_path, QUICK_IIG)
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["run", path, "--seed", "7", "--out", str(a)]) == 0
    assert main(["run", path, "--seed", "7", "--out", str(b)]) == 0
    for name in ("path.csv", "ric.csv", "tree.csv", "path_min_cost.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert "planner.rng_seed = 7" in (a / "config.cfg").read_text()
    # the echoed config alone reproduces the run
    assert main(["run", str(a / "config.cfg"), "--out", str(c)]) == 0
    for name in ("path.csv", "ric.csv"):
        assert (a / name).read_bytes() == (c / name).read_bytes()
    assert len(_rows(a / "ric.csv")) > 1


def test_set_override(tmp_path):
    path = _cfg(tmp_path, QUICK_RRT)
    assert main(["validate", path, "--set", "barrier.gamma=2"]) == 2
    assert main(["validate", path, "--set", "barrier.gamma=0.5"]) == 0


def test_console_entry_point(tmp_path):
    path = _cfg(tmp_path, "lip.com_height = -1\n")
    proc = subprocess.run([sys.executable, "-m", "safeplan.cli", "validate", path],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert "lip.com_height" in proc.stdout
