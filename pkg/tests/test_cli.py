import json
import shutil
import subprocess
import sys

import pytest

from conftest import FIXTURES
from termplan.cli import main
from termplan.dsl import load_task, parse_problem
from termplan.dynamics import update_pointed
from termplan.semantics import isomorphic

SC = ["-d", str(FIXTURES / "sc.tmd"), "-p", str(FIXTURES / "sc.tmp")]
MM = ["-d", str(FIXTURES / "mm.tmd"), "-p", str(FIXTURES / "mm.tmp")]


def run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_plan_mm(capsys):
    code, out, _ = run(capsys, ["plan", *MM, "--max-depth", "3"])
    assert code == 0
    assert out.splitlines() == ["Malfunction(m1,box)@em", "Reboot(a1,sn1)@er1"]


def test_plan_depth_zero(capsys):
    code, out, _ = run(capsys, ["plan", *MM, "--max-depth", "0"])
    assert code == 1
    assert out.strip() == "no plan within bound"


def test_plan_exclude_exhausts(capsys):
    code, out, _ = run(capsys, ["plan", *MM, "--max-depth", "3", "--exclude", "Reboot(a1,*)", "--json"])
    assert code == 1
    data = json.loads(out)
    assert data["status"] == "none_within_bound" and data["exhausted"]


def test_check(capsys):
    code, out, _ = run(capsys, ["check", *SC, "--formula",
                                "(knows (a3) (exists (?x - obj) (Color b1 ?x)))", "--at", "w_red"])
    assert (code, out.strip()) == (0, "true")
    code, out, _ = run(capsys, ["check", *SC, "-f", "exists x:obj. K[a3] Color(b1,x)"])
    assert (code, out.strip()) == (1, "false")


@pytest.mark.parametrize("argv", [
    ["check", "-d", "/nonexistent.tmd", "-p", "/nonexistent.tmp", "-f", "TRUE"],
    ["check", *SC, "-f", "Nope(b1)"],
    ["check", *SC, "-f", "Color(b1,x)"],
    ["check", *SC, "-f", "TRUE", "--at", "w_blue"],
    ["plan", *MM],
    ["frames", "--check", "N"],
    ["bogus"],
])
def test_usage_errors(capsys, argv):
    code, _, _ = run(capsys, argv)
    assert code == 2


def test_validate(capsys):
    for files in (SC, MM):
        code, out, _ = run(capsys, ["validate", *files])
        assert code == 0
        assert out.strip().endswith("ok")


def test_update_matches_in_memory(capsys, tmp_path):
    target = tmp_path / "s1.tmp"
    code, out, _ = run(capsys, ["update", *SC, "-a", "Move(a1,r1,r2)@em", "-o", str(target)])
    assert code == 0
    dom, prob = load_task((FIXTURES / "sc.tmd").read_text(), (FIXTURES / "sc.tmp").read_text())
    s = update_pointed(prob.initial, prob.action_resolver()("Move", ("a1", "r1", "r2")), "em")
    new = parse_problem(target.read_text(), dom)
    assert new.point == "w_red.em"
    assert isomorphic(s.model, new.model, s.point, new.point)


def test_update_not_applicable(capsys):
    code, out, _ = run(capsys, ["update", *SC, "-a", "Move(a1,r3,r4)@em"])
    assert code == 1
    assert out.startswith("not applicable")


def test_verify(capsys, tmp_path):
    good = tmp_path / "good.plan"
    good.write_text("Malfunction(m1,box)@em\nReboot(a1,sn1)@er1\n")
    bad = tmp_path / "bad.plan"
    bad.write_text("Malfunction(m1,box)\nReboot(a2,sn1)\nReboot(a2,sn2)\n")
    assert run(capsys, ["verify", *MM, "--plan", str(good)])[:2] == (0, "valid\n")
    code, out, _ = run(capsys, ["verify", *MM, "--plan", str(bad)])
    assert code == 1 and "step 3" in out


def test_translate(capsys):
    code, out, _ = run(capsys, ["translate", *SC, "--json", "--trace", "-f",
                                "[Move(a1,r1,r2)@em] K[a1] In(a1,r2)"])
    assert code == 0
    data = json.loads(out)
    assert [t["axiom"] for t in data["trace"]][0] == "knowledge"
    assert all(t["complexity_after"] < t["complexity_before"] for t in data["trace"])
    assert "@" not in data["infix"]


def test_frames_and_properties(capsys):
    code, out, _ = run(capsys, ["frames", "--check", "4", "--agents", "1", "--worlds", "2", "--json"])
    assert code == 0
    data = json.loads(out)
    assert data["confirmed"] and data["frames"] == 12
    code, out, _ = run(capsys, ["properties", *SC, "--json"])
    assert code == 0
    flags = json.loads(out)
    assert all(v["reflexive"] and v["euclidean"] for v in flags["agents"].values())


def test_output_is_deterministic(capsys):
    argv = ["plan", *SC, "--max-depth", "3", "--json"]
    first = run(capsys, argv)
    second = run(capsys, argv)
    assert first == second


def test_console_script():
    exe = shutil.which("termplan")
    cmd = [exe] if exe else [sys.executable, "-m", "termplan.cli"]
    res = subprocess.run([*cmd, "plan", *MM, "--max-depth", "3"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout == "Malfunction(m1,box)@em\nReboot(a1,sn1)@er1\n"
