import pytest

from fsakit import Dfa, OocConfig, minimize_forward
from fsakit.fuzz import FuzzLimits, default_minimizers, fuzz_equivalence
from fsakit.io import loads_text


def test_clean_run(tmp_path):
    cfg = OocConfig(workers=2, buffer_bytes=16 << 10, tmpdir=str(tmp_path))
    v = fuzz_equivalence(1, 12, FuzzLimits(max_states=6), workers=2, ooc_config=cfg)
    assert v.passed, v.failures
    assert v.to_dict()["passed"] is True


def _flip_initial(d):
    m = minimize_forward(d)
    acc = m.accepting_mask.copy()
    acc[m.initial] = not acc[m.initial]
    return Dfa(m.alphabet_size, m.num_states, m.initial, acc, m.table)


def test_broken_minimizer_is_caught():
    mins = default_minimizers(2)
    mins["broken"] = _flip_initial
    v = fuzz_equivalence(2, 6, engines=("seq",), minimizers=mins)
    assert not v.passed
    assert {f["check"] for f in v.failures} == {"minimize-broken"}
    loads_text(v.failures[0]["automaton"])


def test_crashing_minimizer_is_a_failure():
    def boom(d):
        raise RuntimeError("nope")
    v = fuzz_equivalence(3, 2, engines=("seq",), minimizers={"boom": boom})
    assert len(v.failures) == 2
    assert "RuntimeError" in v.failures[0]["detail"]


def test_reproducible():
    a = fuzz_equivalence(9, 4, engines=("seq",), minimizers={"broken": _flip_initial})
    b = fuzz_equivalence(9, 4, engines=("seq",), minimizers={"broken": _flip_initial})
    assert a.failures == b.failures


def test_zero_cases_vacuous():
    assert fuzz_equivalence(1, 0).passed


@pytest.mark.slow
def test_seed_1_hundred_cases(tmp_path):
    cfg = OocConfig(workers=4, buffer_bytes=64 << 10, tmpdir=str(tmp_path))
    v = fuzz_equivalence(1, 100, FuzzLimits(max_states=10), ooc_config=cfg)
    assert v.passed, v.failures[:3]
