import csv
import json
import subprocess
import sys

import pytest

from fsakit.cli import main
from fsakit.generators import kth_from_end, random_dfa
from fsakit.io import read_automaton, write_automaton
from oracles import BUFFER3_COUNTS, BUFFER3_DFA_STATES, BUFFER3_K4_PROFILE, CATALAN


@pytest.fixture(autouse=True)
def _cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def test_tpn_gen_then_determinize_all_engines(tmp_path):
    assert main(["tpn-gen", "--depth", "4", "--out", "t.fsa", "--quiet"]) == 0
    for e in ("seq", "mt", "ooc"):
        rc = main(["determinize", "--in", "t.fsa", "--out", f"d-{e}.fsad", "--engine", e,
                   "--profile-csv", f"p-{e}.csv", "--buffer-bytes", "65536"])
        assert rc == 0
    blobs = {(tmp_path / f"d-{e}.fsad").read_bytes() for e in ("seq", "mt", "ooc")}
    assert len(blobs) == 1
    assert read_automaton("d-seq.fsad").num_states == BUFFER3_DFA_STATES[4]
    with open("p-ooc.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["new_states"]) for r in rows] == BUFFER3_K4_PROFILE
    assert not (tmp_path / "tmp" / "ooc-determinize").exists()


def test_minimize_report_json(tmp_path):
    write_automaton(random_dfa(4, 40, 2), "d.fsad")
    assert main(["minimize", "--in", "d.fsad", "--out", "m.fsad", "--report-json", "r.json"]) == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["input_states"] == 40
    assert rep["output_states"] == read_automaton("m.fsad").num_states
    assert rep["sweeps"] >= 1 and rep["wall_seconds"] >= 0


def test_minimize_algos_agree():
    write_automaton(random_dfa(5, 30, 3, density=0.6), "d.fsad")
    for algo in ("forward", "hopcroft", "brzozowski"):
        assert main(["minimize", "--in", "d.fsad", "--out", f"{algo}.fsad", "--algo", algo]) == 0
    assert read_automaton("hopcroft.fsad") == read_automaton("forward.fsad")
    assert read_automaton("brzozowski.fsad") == read_automaton("forward.fsad")


def test_tpn_check_csv(capsys):
    assert main(["tpn-check", "--family", "stack", "--n", "6"]) == 0
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert rows[0] == ["n", "achievable_count", "catalan_like_reference"]
    assert [int(r[1]) for r in rows[1:]] == CATALAN
    assert main(["tpn-check", "--depth", "2", "--n", "5", "--out", "c.csv"]) == 0
    with open("c.csv") as fh:
        assert [int(r["achievable_count"]) for r in csv.DictReader(fh)] == BUFFER3_COUNTS[2][:5]


def test_complement_reverse_intersect():
    write_automaton(random_dfa(1, 8, 2), "a.fsad")
    write_automaton(random_dfa(2, 8, 2), "b.fsad")
    assert main(["complement", "--in", "a.fsad", "--out", "c.fsad"]) == 0
    assert main(["reverse", "--in", "a.fsad", "--out", "r.fsa"]) == 0
    assert main(["intersect", "--in", "a.fsad", "c.fsad", "--out", "x.fsad"]) == 0
    assert main(["minimize", "--in", "x.fsad", "--out", "xm.fsad"]) == 0
    x = read_automaton("xm.fsad")
    assert x.num_states == 1 and not x.accepting


def test_pipeline_command(tmp_path):
    (tmp_path / "p.yaml").write_text(
        "version: 1\nseed: 4\nstages:\n  - op: tpn-gen\n    depth: 2\n  - op: determinize\n"
        "    engine: ooc\n  - op: stats\n")
    assert main(["pipeline", "--spec", "p.yaml", "--report-json", "rep.json"]) == 0
    rep = json.loads((tmp_path / "rep.json").read_text())
    assert rep["seed"] == 4 and rep["stages"][1]["output_states"] == BUFFER3_DFA_STATES[2]


def test_fuzz_command(tmp_path):
    assert main(["fuzz", "--seed", "1", "--cases", "4", "--engines", "seq,mt",
                 "--report-json", "f.json", "--quiet"]) == 0
    assert json.loads((tmp_path / "f.json").read_text())["passed"] is True


def test_ooc_resume_via_cli(tmp_path, monkeypatch):
    write_automaton(kth_from_end(6), "k.fsa")
    args = ["determinize", "--in", "k.fsa", "--out", "k.fsad", "--engine", "ooc", "--workers", "2",
            "--buffer-bytes", "16384", "--workdir", "wd"]
    assert main(args + ["--tmpdir", "t"]) == 0
    full = (tmp_path / "k.fsad").read_bytes()
    monkeypatch.setenv("AUTOSCALE_DISK_LIMIT", "3000")
    assert main(args) == 3
    monkeypatch.delenv("AUTOSCALE_DISK_LIMIT")
    assert (tmp_path / "wd" / "manifest.json").exists()
    assert main(args + ["--resume"]) == 0
    assert (tmp_path / "k.fsad").read_bytes() == full


@pytest.mark.parametrize("argv,code", [
    (["minimize", "--in", "missing.fsad", "--out", "x.fsad"], 2),
    (["determinize", "--in", "bad.fsa", "--out", "x.fsad"], 2),
    (["minimize", "--in", "n.fsa", "--out", "x.fsad"], 2),
    (["determinize", "--in", "n.fsa", "--out", "x.fsad", "--max-states", "2"], 3),
    (["tpn-check", "--n", "0", "--depth", "2"], 2),
    (["fuzz", "--engines", "gpu"], 2),
])
def test_exit_codes(argv, code, capsys):
    with open("bad.fsa", "w") as fh:
        fh.write("not an automaton\n")
    write_automaton(kth_from_end(3), "n.fsa")
    assert main(argv) == code
    assert capsys.readouterr().err.startswith("fsakit ")


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["determinize", "--engine", "gpu"])
    assert info.value.code == 2


def test_failed_report_json(tmp_path):
    write_automaton(kth_from_end(5), "n.fsa")
    assert main(["determinize", "--in", "n.fsa", "--out", "x.fsad", "--max-states", "3",
                 "--report-json", "r.json"]) == 3
    assert json.loads((tmp_path / "r.json").read_text())["status"] == "failed"


def test_console_script_module():
    out = subprocess.run([sys.executable, "-m", "fsakit", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "fsakit" in out.stdout


def test_fuzz_failure_exits_4(monkeypatch, capsys):
    import fsakit.cli as cli
    from fsakit.fuzz import Verdict

    def fake(seed, cases, *a, **k):
        return Verdict(seed, cases, [{"case": 0, "check": "minimize-x", "detail": "differs",
                                      "automaton": "fsa nfa\n"}])
    monkeypatch.setattr(cli, "fuzz_equivalence", fake)
    assert main(["fuzz", "--cases", "1", "--engines", "seq", "--report-json", "f.json"]) == 4
    assert "minimize-x" in capsys.readouterr().err
    assert json.loads(open("f.json").read())["status"] == "failed"
