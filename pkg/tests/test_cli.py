import json
from pathlib import Path

import numpy as np
import pytest

from payloadcheck.analysis import reachable_area
from payloadcheck.cli import UsageError, main, parse_masses
from payloadcheck.kinematics import ee_pose
from payloadcheck.trajectory import DEFAULT_REGION, load_trajectory, save_trajectory, static_trajectory

PENDULUM = """<robot name="pendulum">
  <link name="base"/>
  <link name="arm">
    <inertial><origin xyz="1 0 0"/><mass value="1.0"/></inertial>
  </link>
  <joint name="j" type="revolute">
    <parent link="base"/><child link="arm"/>
    <axis xyz="0 -1 0"/>
    <limit lower="-3.14" upper="3.14" effort="10" velocity="2"/>
  </joint>
  <link name="tip"/>
  <joint name="tip_joint" type="fixed">
    <parent link="arm"/><child link="tip"/><origin xyz="1 0 0"/>
  </joint>
</robot>
"""


@pytest.fixture
def pendulum_files(tmp_path):
    model = tmp_path / "pendulum.urdf"
    model.write_text(PENDULUM)
    traj = tmp_path / "static.json"
    save_trajectory(static_trajectory([0.0], 3), traj)
    return model, traj


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def tree_bytes(root: Path):
    return {p.name: p.read_bytes() for p in sorted(root.iterdir())}


def test_parse_masses():
    assert parse_masses("0:18:1") == [float(m) for m in range(19)]
    assert parse_masses("3:3:1") == [3.0]
    assert parse_masses("0:1:0.1")[-1] == 1.0 and len(parse_masses("0:1:0.1")) == 11
    assert parse_masses("2.5") == [2.5]
    for bad in ("a:b:c", "0:1", "1:0:1", "0:1:0"):
        with pytest.raises(UsageError):
            parse_masses(bad)


def test_info_panda(capsys):
    code, out, _ = run(capsys, "info")
    assert code == 0
    assert "dof: 7" in out
    assert sum(1 for line in out.splitlines() if line.strip().startswith("joint ")) == 7
    assert "total mass" in out and "effort 87" in out and "effort 12" in out


def test_info_branching(capsys, tmp_path):
    text = PENDULUM.replace(
        "</robot>",
        '<link name="x"/><joint name="b" type="fixed"><parent link="arm"/><child link="x"/></joint></robot>',
    )
    bad = tmp_path / "branch.urdf"
    bad.write_text(text)
    code, _, err = run(capsys, "info", "--model", bad)
    assert code == 2 and "BranchingChain" in err


def test_info_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "info", "--model", tmp_path / "nope.urdf")
    assert code == 2 and "not found" in err


def test_validate_feasible(capsys, pendulum_files, tmp_path):
    model, traj = pendulum_files
    out_json = tmp_path / "report.json"
    code, out, _ = run(capsys, "validate", traj, "--model", model, "--out", out_json)
    assert code == 0
    assert "worst_ratio: 0.981" in out
    report = json.loads(out_json.read_text())
    assert report["valid"] is True and report["first_violation"] is None


def test_validate_overload(capsys, pendulum_files):
    model, traj = pendulum_files
    code, out, _ = run(capsys, "validate", traj, "--model", model, "--payload-mass", 1.0)
    assert code == 1
    assert "first_violation: waypoint 0 joint 0 tau 19.62 limit 10" in out


def test_validate_payload_json_and_offset(capsys, pendulum_files, tmp_path):
    model, traj = pendulum_files
    pfile = tmp_path / "p.json"
    pfile.write_text(json.dumps({"mass_kg": 1.0, "com_offset_m": [-1.0, 0, 0]}))
    # payload sitting on the joint axis adds no torque
    code, out, _ = run(capsys, "validate", traj, "--model", model, "--payload-json", pfile)
    assert code == 0 and "worst_ratio: 0.981" in out
    code, out, _ = run(capsys, "validate", traj, "--model", model, "--payload-mass", 1.0, "--payload-offset=-1,0,0")
    assert code == 0


def test_validate_malformed_trajectory(capsys, pendulum_files, tmp_path):
    model, _ = pendulum_files
    bad = tmp_path / "bad.json"
    bad.write_text('{"waypoints": [{"t": 0, "q": [0]}]}')
    code, _, err = run(capsys, "validate", bad, "--model", model)
    assert code == 2 and "MalformedTrajectory" in err


def test_validate_effort_override(capsys, pendulum_files):
    model, traj = pendulum_files
    code, _, _ = run(capsys, "validate", traj, "--model", model, "--payload-mass", 50, "--effort-limit", "inf")
    assert code == 0


def test_gen_zero_count(capsys, tmp_path):
    code, _, _ = run(capsys, "gen", "--count", 0, "--out", tmp_path / "g")
    assert code == 0
    manifest = json.loads((tmp_path / "g" / "manifest.json").read_text())
    assert manifest["items"] == [] and manifest["count"] == 0 and manifest["seed"] == 20240


def test_gen_same_seed_identical(capsys, tmp_path):
    for name in ("a", "b"):
        assert run(capsys, "gen", "--count", 6, "--out", tmp_path / name)[0] == 0
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert [e["seed"] for e in manifest["items"]] == [[20240, i] for i in range(6)]


def test_gen_push_spans(capsys, tmp_path, panda):
    assert run(capsys, "gen", "--mode", "push", "--count", 8, "--out", tmp_path / "p")[0] == 0
    files = sorted((tmp_path / "p").glob("traj_*.json"))
    assert files
    for f in files:
        traj = load_trajectory(f)
        span = ee_pose(panda, traj.q[-1]).position - ee_pose(panda, traj.q[0]).position
        assert abs(np.linalg.norm(span) - 0.10) < 1e-4
        assert traj.meta["primitive"] == "push"
    manifest = json.loads((tmp_path / "p" / "manifest.json").read_text())
    failed = [e for e in manifest["items"] if e["status"] == "failed"]
    assert len(files) + len(failed) == 8 and all(e["error"] for e in failed)


@pytest.fixture(scope="module")
def pick_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("picks")
    assert main(["gen", "--count", "12", "--out", str(d)]) == 0
    return d


def test_sweep_rows(capsys, pick_dir):
    code, out, _ = run(capsys, "sweep", pick_dir, "--masses", "0:18:1")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "payload_kg,valid_fraction,n_valid,n_total,n_unreachable" and len(lines) == 20
    fractions = [float(l.split(",")[1]) for l in lines[1:]]
    assert fractions[0] >= fractions[-1]
    code, out, _ = run(capsys, "sweep", pick_dir, "--masses", "3:3:1")
    assert len(out.splitlines()) == 2 and out.splitlines()[1].startswith("3,")


def test_sweep_thread_independent(capsys, pick_dir, tmp_path):
    run(capsys, "sweep", pick_dir, "--threads", 1, "--out", tmp_path / "a.csv")
    run(capsys, "sweep", pick_dir, "--threads", 8, "--out", tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_sweep_counts_unreachable_from_manifest(capsys, pick_dir):
    manifest = json.loads((pick_dir / "manifest.json").read_text())
    n_failed = sum(e["status"] != "ok" for e in manifest["items"])
    _, out, _ = run(capsys, "sweep", pick_dir, "--masses", "0")
    assert out.splitlines()[1].split(",")[3:] == [str(12 - n_failed), str(n_failed)]


def test_sweep_empty_dir(capsys, tmp_path):
    (tmp_path / "empty").mkdir()
    code, _, err = run(capsys, "sweep", tmp_path / "empty")
    assert code == 2 and "no trajectories" in err


def test_workspace_zero_samples(capsys, tmp_path):
    code, out, _ = run(capsys, "workspace", "--count", 0, "--out", tmp_path / "w")
    assert code == 0 and "area_m2: 0" in out
    assert (tmp_path / "w" / "grid.csv").is_file() and (tmp_path / "w" / "grid.json").is_file()


def area_of(out):
    return float(next(l for l in out.splitlines() if l.startswith("area_m2:")).split()[1])


def test_workspace_infinite_limits_is_reachable_area(capsys, tmp_path):
    code, out, _ = run(capsys, "workspace", "--count", 40, "--effort-limit", "inf", "--payload-mass", 18, "--out", tmp_path / "w")
    assert code == 0
    run(capsys, "gen", "--count", 40, "--out", tmp_path / "g")
    targets = [load_trajectory(f).meta["target_ee_position"] for f in sorted((tmp_path / "g").glob("traj_*.json"))]
    assert area_of(out) == pytest.approx(reachable_area(targets, DEFAULT_REGION, 0.02).area, abs=1e-15)


def test_workspace_heavier_payload_shrinks_area(capsys, tmp_path):
    _, out3, _ = run(capsys, "workspace", "--count", 60, "--payload-mass", 3, "--out", tmp_path / "w3")
    _, out8, _ = run(capsys, "workspace", "--count", 60, "--payload-mass", 8, "--out", tmp_path / "w8")
    assert area_of(out8) <= area_of(out3)
    assert area_of(out3) > 0


def test_bad_usage(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 2
    assert run(capsys, "gen", "--count", -1)[0] == 2
    assert run(capsys, "gen", "--count", 1, "--region", "1,0,0,1")[0] == 2
    assert run(capsys, "info", "--threads", 0)[0] == 2
    assert run(capsys, "validate", "missing.json")[0] == 2
