import json
import xml.etree.ElementTree as ET
from dataclasses import replace

import numpy as np
import pytest

from hmmlfd import cli
from hmmlfd.generalize import GeneralizedTrajectory
from hmmlfd.kinematics import baxter_chain, forward_kinematics
from hmmlfd.pipeline import load_model, save_model
from hmmlfd.trajectory import JointLogRecord, load_demo, save_joint_log

SVG = "{http://www.w3.org/2000/svg}"


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _error_line(err):
    lines = err.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith("error["), err
    return lines[0]


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert cli.main(["synth", "--template", "stack_cup", "--count", "3", "--seed", "21", "--rate", "500",
                     "--out", str(d / "demos")]) == 0
    demos = sorted((d / "demos").glob("*.csv"))
    assert cli.main(["learn", *map(str, demos), "--seed", "1", "--out", str(d / "model.json")]) == 0
    return d


def _demos(workdir):
    return sorted(str(p) for p in (workdir / "demos").glob("*.csv"))


def test_synth_writes_demos(workdir):
    demos = _demos(workdir)
    assert [p.rsplit("/", 1)[1] for p in demos] == ["stack_cup_0.csv", "stack_cup_1.csv", "stack_cup_2.csv"]
    assert all(len(load_demo(p)) > 5000 for p in demos)


def test_learn_report(workdir, capsys, tmp_path):
    code, out, _ = run(capsys, "learn", *_demos(workdir), "--seed", "1", "--out", tmp_path / "m.json")
    assert code == 0
    rows = dict(line.split(",", 1) for line in out.strip().splitlines()[1:])
    assert out.startswith("key,value\n")
    assert int(rows["k"]) >= int(rows["states"]) >= 4
    assert (tmp_path / "m.json").read_bytes() == (workdir / "model.json").read_bytes()
    prov = json.loads((tmp_path / "m.json").read_text())["provenance"]
    assert set(prov["inputs"]) == {"stack_cup_0.csv", "stack_cup_1.csv", "stack_cup_2.csv"}


def test_learn_config_file_and_flags(workdir, capsys, tmp_path):
    cfg = tmp_path / "t.cfg"
    cfg.write_text("eps1 = 2.0\nsmoothing = 0.8\n")
    code, _, _ = run(capsys, "learn", *_demos(workdir), "--config", cfg, "--eps2", "0.01",
                     "--out", tmp_path / "m.json")
    assert code == 0
    conf = load_model(tmp_path / "m.json").provenance["config"]
    assert conf["smoothing"] == 0.8 and conf["keypoints"]["eps1"] == 2.0 and conf["keypoints"]["eps2"] == 0.01
    cfg.write_text("colour = 3\n")
    code, _, err = run(capsys, "learn", *_demos(workdir), "--config", cfg, "--out", tmp_path / "x.json")
    assert code == 3 and "colour" in _error_line(err)


def test_eval_own_and_wrong_template(workdir, capsys, tmp_path):
    code, out, _ = run(capsys, "eval", workdir / "model.json", "--template", "stack_cup",
                       "--out", tmp_path / "r.csv", "--figure", tmp_path / "d.svg")
    assert code == 0 and (tmp_path / "r.csv").read_text() == out
    own = dict(line.split(",", 1) for line in out.strip().splitlines()[1:])
    code, out, _ = run(capsys, "eval", workdir / "model.json", "--template", "pick_place")
    assert code == 0
    wrong = dict(line.split(",", 1) for line in out.strip().splitlines()[1:])
    assert float(wrong["rms_deviation_m"]) > 3 * float(own["rms_deviation_m"])
    assert float(wrong["corner_recall"]) < float(own["corner_recall"]) == 1.0
    svg = ET.parse(tmp_path / "d.svg").getroot()
    assert len(svg.findall(f".//{SVG}g[@id='deviation']")) == 1


def test_eval_is_repeatable(workdir, capsys, tmp_path):
    for name in ("a", "b"):
        assert run(capsys, "eval", workdir / "model.json", "--template", "stack_cup", "--out",
                   tmp_path / f"{name}.csv", "--figure", tmp_path / f"{name}.svg")[0] == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_unknown_template(workdir, capsys):
    code, _, err = run(capsys, "eval", workdir / "model.json", "--template", "juggle")
    line = _error_line(err)
    assert code == 2 and "pick_place" in line and "stack_cup" in line


def _gid_uses(root, gid):
    (g,) = root.findall(f".//{SVG}g[@id='{gid}']")
    return len(g.findall(f".//{SVG}use"))


def test_plot_structure(workdir, capsys, tmp_path):
    out = tmp_path / "p.svg"
    code, _, _ = run(capsys, "plot", *_demos(workdir), "--model", workdir / "model.json", "--keypoints",
                     "--title", "stack", "--out", out)
    assert code == 0
    root = ET.parse(out).getroot()
    ids = {g.get("id") for g in root.iter(f"{SVG}g")}
    assert {"demo-0", "demo-1", "demo-2", "generalized", "centroids"} <= ids
    assert "demo-3" not in ids
    k = load_model(workdir / "model.json").report["k"]
    assert _gid_uses(root, "centroids") == k
    rows = (tmp_path / "p.csv").read_text().splitlines()
    assert rows[0] == "series,index,t,x,y,z"
    assert sum(r.startswith("centroids,") for r in rows) == k


def test_plot_demos_only_and_repeatable(workdir, capsys, tmp_path):
    for name in ("a", "b"):
        assert run(capsys, "plot", *_demos(workdir), "--out", tmp_path / f"{name}.svg")[0] == 0
    root = ET.parse(tmp_path / "a.svg").getroot()
    ids = {g.get("id") for g in root.iter(f"{SVG}g")}
    assert "generalized" not in ids and "centroids" not in ids
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def _short_model(workdir, tmp_path, stride=40, break_at=None):
    model = load_model(workdir / "model.json")
    g = model.generalized
    pos = g.positions[::stride].copy()
    if break_at is not None:
        pos[break_at] = [3.0, 0.0, 0.0]
    short = GeneralizedTrajectory(g.times[::stride], pos, g.orientations[::stride], g.gripper[::stride])
    path = tmp_path / "short.json"
    save_model(replace(model, generalized=short), path)
    return path, len(short)


def test_execute_repeatable_and_accurate(workdir, capsys, tmp_path):
    model, n = _short_model(workdir, tmp_path)
    for name in ("a", "b"):
        code, out, _ = run(capsys, "execute", model, "--out", tmp_path / f"{name}.csv")
        assert code == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    rows = dict(line.split(",", 1) for line in out.strip().splitlines()[1:])
    assert int(rows["samples"]) == n
    assert float(rows["max_position_error_m"]) <= 1e-5
    chain = baxter_chain()
    data = np.loadtxt(tmp_path / "a.csv", delimiter=",", skiprows=1)
    positions = load_model(model).generalized.positions
    for q, p in zip(data[:, 1:8], positions):
        assert np.linalg.norm(forward_kinematics(chain, q).position - p) <= 1e-4


def test_execute_unreachable(workdir, capsys, tmp_path):
    model, _ = _short_model(workdir, tmp_path, break_at=5)
    code, _, err = run(capsys, "execute", model, "--out", tmp_path / "j.csv")
    line = _error_line(err)
    assert code == 4 and "UNREACHABLE" in line and "sample 5" in line
    assert not (tmp_path / "j.csv").exists()


def test_execute_bad_seed_joints(workdir, capsys, tmp_path):
    code, _, err = run(capsys, "execute", workdir / "model.json", "--seed-joints", "0,0,0")
    assert code == 2 and "7" in _error_line(err)


def test_ingest(capsys, tmp_path):
    chain = baxter_chain()
    rng = np.random.default_rng(0)
    recs = [JointLogRecord(i / 1000, tuple(rng.uniform(chain.lower, chain.upper)), 0.04) for i in range(30)]
    save_joint_log(recs, tmp_path / "run1.csv")
    zeros = [JointLogRecord(i / 1000, (0.0,) * 7, 0.0) for i in range(3)]
    save_joint_log(zeros, tmp_path / "zero.csv")
    code, out, _ = run(capsys, "ingest", tmp_path / "run1.csv", tmp_path / "zero.csv", "--out", tmp_path / "demos")
    assert code == 0 and "samples=30" in out
    demo = load_demo(tmp_path / "demos" / "zero.csv")
    fk = forward_kinematics(chain, np.zeros(7))
    assert np.allclose(demo.positions, fk.position, atol=1e-12)
    assert len(load_demo(tmp_path / "demos" / "run1.csv")) == 30


def test_ingest_wrong_joint_count(capsys, tmp_path):
    bad = tmp_path / "six.csv"
    bad.write_text("t,j1,j2,j3,j4,j5,j6,gripper_width\n0,0,0,0,0,0,0,0.01\n")
    code, _, err = run(capsys, "ingest", bad, "--out", tmp_path / "demos")
    line = _error_line(err)
    assert code == 3 and "got 8" in line


@pytest.mark.parametrize("argv,code", [
    (["learn"], 2),
    (["bogus"], 2),
    (["learn", "/nonexistent/demo.csv"], 3),
    (["execute", "/nonexistent/model.json"], 3),
    (["synth", "--template", "stack_cup", "--count", "x"], 2),
    (["plot"], 2),
])
def test_errors_are_single_lines(capsys, argv, code):
    got, out, err = run(capsys, *argv)
    assert got == code
    _error_line(err)


def test_bad_model_file(capsys, tmp_path):
    (tmp_path / "m.json").write_text("[1, 2")
    code, _, err = run(capsys, "execute", tmp_path / "m.json")
    assert code == 3 and _error_line(err).startswith("error[PARSE]")


def test_eval_times_events_on_reference_demo(workdir, capsys):
    code, out, _ = run(capsys, "eval", workdir / "model.json", "--template", "stack_cup", "--demos", *_demos(workdir))
    rows = dict(line.split(",", 1) for line in out.strip().splitlines()[1:])
    assert code == 0 and rows["gripper_timing_reference"] == "reference-demo"
    assert float(rows["gripper_timing_max_error_s"]) < 0.2
    ref = load_model(workdir / "model.json").report["reference_id"]
    others = [p for p in _demos(workdir) if not p.endswith(f"{ref}.csv")]
    code, _, err = run(capsys, "eval", workdir / "model.json", "--template", "stack_cup", "--demos", *others)
    assert code == 2 and ref in _error_line(err)
