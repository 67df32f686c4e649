import hashlib
import json
import subprocess
import sys

import pytest

from descgraph import cli
from descgraph.amalgam import complement, free_amalgam
from descgraph.gamma_checks import tree_prefix
from descgraph.limit import grow, history_digest, new_state
from descgraph.presentation import Presentation, canonical_form, tn, tree


def call(capsys, *argv):
    code = cli.run([str(a) for a in argv])
    out = capsys.readouterr().out
    try:
        return code, json.loads(out)
    except json.JSONDecodeError:
        return code, out


@pytest.fixture
def files(tmp_path):
    def write(name, obj):
        path = tmp_path / name
        path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
        return path
    return write


def test_validate_and_canon_parity(capsys, files):
    t2 = files("t2.json", tn(2, 2).to_dict())
    code, rep = call(capsys, "validate", t2)
    assert code == 0 and rep["ok"]
    code, rep = call(capsys, "canon", t2)
    form = canonical_form(tn(2, 2))
    assert code == 0 and rep["canonical_form"] == form.decode()
    assert rep["sha256"] == hashlib.sha256(form).hexdigest()


def test_validate_negative_verdict(capsys, files):
    bad = Presentation.build(2, ["a", "b"], [("a", "b")], ["b"])
    code, rep = call(capsys, "validate", files("bad.json", bad.to_dict()))
    assert code == 1 and not rep["ok"] and rep["violations"]


def test_contains_tn(capsys, files):
    code, rep = call(capsys, "contains-tn", files("t3.json", tn(3, 2).to_dict()), "--n", 3)
    assert code == 0 and rep == {"contains": True, "multiplicity": 3, "n": 3}


def test_reduce_writes_dot(capsys, files, tmp_path):
    code, rep = call(capsys, "reduce", files("t.json", tree(2).to_dict()), "--dot", tmp_path / "t.dot",
                     "--out", tmp_path / "r.json")
    assert code == 0 and (tmp_path / "t.dot").read_text().startswith("digraph")
    assert Presentation.from_json((tmp_path / "r.json").read_text()) == tree(2)


def test_amalgamate_bundle(capsys, files):
    stub = Presentation.build(2, ["a0", "a1"], [], ["a0", "a1"])
    bundle = {"A": stub.to_dict(), "A_generators": ["a0", "a1"], "B1": tree(2).to_dict(),
              "B2": tree(2).to_dict(), "f1": {"a0": "r/0", "a1": "r/1"}, "f2": {"a0": "r/0", "a1": "r/1"}}
    path = files("prob.json", bundle)
    code, rep = call(capsys, "amalgamate", path, "--mode", "class", "--n", 2)
    assert code == 0 and len(rep["identifications"]) == 1 and rep["max_multiplicity"] == 1
    code, rep = call(capsys, "amalgamate", path, "--mode", "free")
    assert code == 0 and rep["max_multiplicity"] == 2 and rep["n"] == "inf"
    code, _ = call(capsys, "amalgamate", files("broken.json", {"A": stub.to_dict()}))
    assert code == 2


def test_construction_commands_match_library(capsys, files):
    t2 = files("t2.json", tn(2, 2).to_dict())
    code, rep = call(capsys, "complement", t2, "--x", "h0")
    assert code == 0 and rep == complement(tn(2, 2), ["h0"]).to_dict()
    code, rep = call(capsys, "merge-preds", t2, "--u", "h0", "h1", "--v", "b/0", "b/1")
    assert code == 0 and rep["U"] == ["x1"] and rep["V"] == ["b"]
    code, rep = call(capsys, "augment", files("t.json", tree(2).to_dict()), "--u", "r/0", "r/1",
                     "--N", 2, "--n", 3)
    assert code == 0 and list(rep["common_predecessors"].values()) == [2]
    code, rep = call(capsys, "replay-free-ext", t2, "--u", "h0", "h1", "--v", "0", "1", "--n", "inf")
    assert code == 0 and rep["report"]["equality_holds"]
    code, rep = call(capsys, "replay-free-ext", t2, "--u", "h0", "h1", "--v", "0", "1", "--n", 3)
    assert code == 3 and rep["error"] == "precondition"


def test_parse_errors(capsys, files, tmp_path):
    assert call(capsys, "validate", tmp_path / "missing.json")[0] == 2
    assert call(capsys, "validate", files("junk.json", "{not json"))[0] == 2
    assert call(capsys, "complement", files("t.json", tree(2).to_dict()), "--x", "r/0a")[0] == 2
    assert call(capsys, "complement", files("t.json", tree(2).to_dict()), "--x", "nope")[0] == 3
    assert call(capsys, "augment", files("t.json", tree(2).to_dict()), "--N", 1, "--n", 1)[0] == 2
    assert call(capsys, "no-such-command")[0] == 2


def test_limit_grow_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    code, rep = call(capsys, "limit-grow", "--n", 3, "--seed", 1, "--steps", 80, "--state", a)
    assert code == 0 and rep["step_count"] == 80
    call(capsys, "limit-grow", "--n", 3, "--seed", 1, "--steps", 80, "--state", b)
    assert a.read_bytes() == b.read_bytes()
    assert rep["history_sha256"] == history_digest(grow(new_state(3, 2, 1), 80))
    code, rep = call(capsys, "limit-grow", "--n", 3, "--seed", 1, "--steps", 20, "--state", a, "--resume")
    assert rep["step_count"] == 100
    assert rep["history_sha256"] == history_digest(grow(new_state(3, 2, 1), 100))


def test_limit_queries(capsys, tmp_path):
    state = tmp_path / "s.json"
    call(capsys, "limit-grow", "--n", "inf", "--steps", 30, "--state", state)
    code, rep = call(capsys, "limit-ball", "--state", state, "--vertex", "r", "--radius", 2)
    assert code == 0 and len(rep["nodes"]) == 7
    code, text = call(capsys, "limit-ball", "--state", state, "--vertex", "r", "--format", "dot")
    assert code == 0 and text.startswith("digraph")
    trial = tmp_path / "trial.json"
    trial.write_text(json.dumps({"base": ["r"], "U": ["r"], "V": ["0"]}))
    code, rep = call(capsys, "limit-check-ext", "--state", state, "--trial", trial, "--budget", 300)
    assert code == 0 and rep["all_realized"]
    code, rep = call(capsys, "limit-check-ext", "--state", state, "--random", 3, "--budget", 600)
    assert code == 0 and len(rep["results"]) == 3
    code, rep = call(capsys, "limit-probe", "--state-a", state, "--state-b", state, "--trials", 4)
    assert code == 0 and rep["passed"]
    assert call(capsys, "limit-ball", "--state", state, "--vertex", "zz")[0] == 3


def test_gamma_check_command(capsys, files):
    path = files("tree.json", tree_prefix(2, 3).to_dict())
    code, rep = call(capsys, "gamma-check", "--file", path, "--checks", "t1,t2,t3,t4,g3")
    assert code == 0 and rep["t1"]["pass"] and rep["t4"]["N"] == 0 and rep["g3"]["k"] == 1
    code, rep = call(capsys, "gamma-check", "--file", path, "--checks", "c2", "--x", "e0", "--N", 1)
    assert code == 0 and rep["c2"]["automorphisms"] == 4
    bad = files("bad.json", {"depth": 2, "levels": [["r"]], "edges": []})
    assert call(capsys, "gamma-check", "--file", bad)[0] == 2
    assert call(capsys, "gamma-check", "--file", path, "--checks", "c2")[0] == 3


def test_workdir_env(capsys, tmp_path, monkeypatch):
    (tmp_path / "t.json").write_text(tree(2).to_json())
    monkeypatch.setenv("DESCGRAPH_WORKDIR", str(tmp_path))
    assert call(capsys, "validate", "t.json")[0] == 0


def test_console_script_runs(tmp_path):
    (tmp_path / "t.json").write_text(tn(2, 2).to_json())
    res = subprocess.run([sys.executable, "-m", "descgraph.cli", "contains-tn", str(tmp_path / "t.json"),
                          "--n", "2"], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["contains"] is True
