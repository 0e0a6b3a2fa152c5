import json
import subprocess
import sys

import pytest

from cellnet import corpus
from cellnet.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, out


def data(name):
    return corpus.path(name)


def test_validate_and_trees(capsys):
    code, out = run(capsys, "validate", data("bicolor"))
    assert code == 0 and json.loads(out)["nodes"] == 5
    code, out = run(capsys, "input-trees", data("feed3"))
    trees = json.loads(out)["input_trees"]
    assert [t["leaves"][0]["source"] for t in trees] == ["2", "1", "2"]


def test_skeleton_and_autos(capsys, tmp_path):
    code, out = run(capsys, "skeleton", data("split_pair"))
    doc = json.loads(out)
    assert code == 0 and len(doc["classes"]) == 2
    code, out = run(capsys, "autos", data("triangle"), "-o", tmp_path / "autos")
    assert json.loads(out)["order"] == 3
    assert len(list((tmp_path / "autos").glob("auto_*.json"))) == 3
    for f in (tmp_path / "autos").glob("auto_*.json"):
        assert run(capsys, "check-etale", "--map", f)[0] == 0


def test_check_etale_exit_codes(capsys, tmp_path):
    assert run(capsys, "check-etale", "--map", data("split_to_double"))[0] == 0
    bad = {"domain": str(data("double_edge")), "codomain": str(data("loop")),
           "node_map": {"1": "o", "2": "o"}, "edge_map": {"alpha": "loop", "beta": "loop"}}
    (tmp_path / "bad.json").write_text(json.dumps(bad))
    code, out = run(capsys, "check-etale", "--map", tmp_path / "bad.json")
    assert code == 1 and json.loads(out)["etale"] is False
    assert run(capsys, "check-etale", "--map", tmp_path / "missing.json")[0] == 2


def test_balanced_and_quotient(capsys, tmp_path):
    code, out = run(capsys, "balanced", data("cycle_tail"), "--enumerate")
    assert code == 0 and json.loads(out)["count"] == 8
    part = tmp_path / "p.json"
    part.write_text(json.dumps({"blocks": [["1", "4"], ["2", "5"], ["3", "6"]]}))
    assert run(capsys, "balanced", data("cycle_tail"), "--partition", part)[0] == 0
    code, out = run(capsys, "quotient", data("cycle_tail"), "--partition", part, "-o", tmp_path / "q")
    assert code == 0 and json.loads(out)["etale"]
    assert run(capsys, "check-etale", "--map", tmp_path / "q" / "projection.json")[0] == 0
    part.write_text(json.dumps({"blocks": [["1", "2"], ["3", "4", "5", "6"]]}))
    code, out = run(capsys, "balanced", data("cycle_tail"), "--partition", part)
    assert code == 1
    part.write_text(json.dumps({"blocks": [["1", "2"]]}))
    assert run(capsys, "balanced", data("cycle_tail"), "--partition", part)[0] == 2


def test_sync_and_group(capsys):
    code, out = run(capsys, "verify-sync", "--map", data("tail_fold"), "--field", data("tanh_single.toml"))
    assert code == 0 and json.loads(out)["max_defect"] <= 1e-10
    code, out = run(capsys, "verify-group", "--graph", data("bicolor"), "--field", data("bicolor_field.toml"))
    assert code == 0 and json.loads(out)["group_order"] == 2


def test_assemble_and_spectrum(capsys, tmp_path):
    code, out = run(capsys, "assemble", "--graph", data("cycle3"), "--field", data("unit_linear.json"), "--linear")
    assert code == 0
    assert out.splitlines()[1] == "a_0,0,0,1"
    code, out = run(capsys, "spectrum", "--graph", data("cycle3"), "--field", data("unit_linear.json"))
    ev = json.loads(out)["eigenvalues"]
    assert len(ev) == 3 and min(abs(e["re"] - 1) + abs(e["im"]) for e in ev) < 1e-9
    code, out = run(capsys, "assemble", "--graph", data("feed3"), "--field", data("tanh_single.toml"))
    assert json.loads(out)["components"]["3"]["sources"] == ["2"]
    # a nonlinear field has no matrix
    assert run(capsys, "spectrum", "--graph", data("cycle3"), "--field", data("tanh_single.toml"))[0] == 2


def test_simulate_is_deterministic(capsys, tmp_path):
    x0 = tmp_path / "x0.csv"
    x0.write_text("1_0,2_0,3_0\n0.1,-0.4,0.9\n")
    outs = []
    for k in range(2):
        path = tmp_path / f"t{k}.csv"
        code, _ = run(capsys, "simulate", "--graph", data("feed3"), "--field", data("tanh_single.toml"),
                      "--x0", x0, "--dt", "0.01", "--steps", "200", "-o", path)
        assert code == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    assert outs[0].splitlines()[0] == b"t,1_0,2_0,3_0"


def test_flow_sync_cli(capsys, tmp_path):
    x0 = tmp_path / "x0.csv"
    x0.write_text("a_0,b_0\n0.4,-0.7\n")
    code, out = run(capsys, "flow-sync", "--map", data("feed3_fold"), "--field", data("tanh_single.toml"),
                    "--x0", x0, "--steps", "2000")
    assert code == 0 and json.loads(out)["pass"]


def test_bad_field_and_usage(capsys, tmp_path):
    bad = tmp_path / "f.json"
    bad.write_text(json.dumps({"dims": {"cell": 1}, "modules": {"c0": {"outputs": ["sin("]}}}))
    assert run(capsys, "verify-sync", "--map", data("tail_fold"), "--field", bad)[0] == 2
    assert main([]) == 2
    capsys.readouterr()


@pytest.mark.parametrize("argv", [["--help"], ["balanced", "--help"]])
def test_help(argv, capsys):
    assert main(argv) == 0


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "cellnet", "validate", str(data("loop"))],
                       capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["valid"]
