import pytest
import yaml

from fsakit import InputError, ResourceError, determinize, run_pipeline
from fsakit.io import read_automaton, write_automaton
from fsakit.pipeline import PipelineSpec
from fsakit.generators import kth_from_end
from oracles import BUFFER3_DFA_STATES


def _spec(tmp_path, stages, **extra):
    doc = {"version": 1, "seed": 3, "workdir": str(tmp_path), "stages": stages, **extra}
    return doc


def test_tpn_chain_all_engines(tmp_path):
    stages = [{"op": "tpn-gen", "depth": 3, "out": "t.fsa"}]
    for e in ("seq", "mt", "ooc"):
        stages.append({"op": "determinize", "in": "t.fsa", "engine": e, "out": f"d-{e}.fsad",
                       "buffer_bytes": 65536} if e == "ooc" else
                      {"op": "determinize", "in": "t.fsa", "engine": e, "out": f"d-{e}.fsad"})
        stages.append({"op": "minimize", "engine": e, "out": f"m-{e}.fsad"})
    stages.append({"op": "stats"})
    report = run_pipeline(_spec(tmp_path, stages))
    assert report["status"] == "ok" and report["seed"] == 3
    det = [r for r in report["stages"] if r["op"] == "determinize"]
    assert {r["output_states"] for r in det} == {BUFFER3_DFA_STATES[3]}
    blobs = {(tmp_path / f"m-{e}.fsad").read_bytes() for e in ("seq", "mt", "ooc")}
    assert len(blobs) == 1
    assert report["stages"][-1]["stats"]["states"] == read_automaton(tmp_path / "m-ooc.fsad").num_states


def test_report_states_match_artifacts(tmp_path):
    write_automaton(kth_from_end(4), tmp_path / "k.fsa")
    report = run_pipeline(_spec(tmp_path, [
        {"op": "determinize", "in": "k.fsa"},
        {"op": "complement"},
        {"op": "reverse", "out": "r.fsa"},
    ]))
    for row in report["stages"]:
        assert read_automaton(tmp_path / row["output"]).num_states == row["output_states"]
    assert report["stages"][0]["profile"] == determinize(kth_from_end(4))[1]


def test_deterministic_reruns(tmp_path):
    doc = _spec(tmp_path, [{"op": "tpn-gen", "depth": 2}, {"op": "determinize"}, {"op": "minimize"}])
    a = run_pipeline(doc)
    first = (tmp_path / "stage2-minimize.fsad").read_bytes()
    b = run_pipeline(doc)
    assert (tmp_path / "stage2-minimize.fsad").read_bytes() == first
    assert [r["output_states"] for r in a["stages"]] == [r["output_states"] for r in b["stages"]]


def test_intersect_with_previous(tmp_path):
    write_automaton(kth_from_end(2), tmp_path / "a.fsa")
    write_automaton(kth_from_end(3), tmp_path / "b.fsa")
    report = run_pipeline(_spec(tmp_path, [
        {"op": "determinize", "in": "b.fsa", "out": "b.fsad"},
        {"op": "determinize", "in": "a.fsa", "out": "a.fsad"},
        {"op": "intersect", "in": ["b.fsad"], "out": "ab.fsad"},
        {"op": "minimize"},
    ]))
    assert report["stages"][2]["input"] == ["a.fsad", "b.fsad"]


def test_yaml_file(tmp_path):
    path = tmp_path / "p.yaml"
    path.write_text(yaml.safe_dump({"version": 1, "stages": [{"op": "tpn-gen", "depth": 1, "out": "t.fsa"}]}))
    report = run_pipeline(path)
    assert (tmp_path / "t.fsa").exists()
    assert report["config"]["stages"][0]["depth"] == 1


@pytest.mark.parametrize("doc", [
    {"stages": []},
    {"version": 2, "stages": []},
    {"version": 1, "stages": [{"op": "bake"}]},
    {"version": 1, "stages": [{"op": "tpn-gen", "depth": 2, "colour": "red"}]},
    {"version": 1, "stages": [{"op": "determinize"}]},
    {"version": 1, "stages": [{"op": "tpn-gen", "depth": 2}, {"op": "minimize"}]},
    {"version": 1, "stages": [{"op": "tpn-gen", "depth": 2, "out": "x.fsad"}]},
    {"version": 1, "stages": [{"op": "tpn-gen", "depth": 2}, {"op": "determinize", "engine": "gpu"}]},
    {"version": 1, "stages": [{"op": "tpn-gen", "depth": 2}, {"op": "determinize"},
                              {"op": "minimize", "engine": "mt", "algo": "hopcroft"}]},
    {"version": 1, "stages": [{"op": "tpn-gen", "depth": 2}, {"op": "stats", "out": "s"}]},
    {"version": 1, "extra": 1, "stages": []},
])
def test_invalid_specs(doc):
    with pytest.raises(InputError):
        PipelineSpec.from_dict(doc)


def test_bad_yaml():
    with pytest.raises(InputError):
        PipelineSpec.from_yaml("version: [1")


def test_failure_keeps_class_and_report(tmp_path):
    doc = _spec(tmp_path, [{"op": "tpn-gen", "depth": 3}, {"op": "determinize", "max_states": 5}])
    with pytest.raises(ResourceError) as info:
        run_pipeline(doc)
    assert "stage 1 (determinize)" in str(info.value)
    assert info.value.report["status"] == "failed"
    assert len(info.value.report["stages"]) == 1


def test_missing_input_file(tmp_path):
    with pytest.raises(InputError):
        run_pipeline(_spec(tmp_path, [{"op": "determinize", "in": "nope.fsa"}]))
