import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsakit import Dfa, InputError, canonical_renumber
from fsakit.generators import random_dfa, random_nfa
from fsakit.io import (
    dumps_packed,
    dumps_text,
    loads_packed,
    loads_text,
    read_automaton,
    read_packed_header,
    write_automaton,
)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 15), m=st.integers(0, 4),
       density=st.floats(0.0, 1.0))
def test_packed_round_trip(seed, n, m, density):
    d = random_dfa(seed, n, m, density=density)
    assert loads_packed(dumps_packed(d)) == d


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 10), m=st.integers(1, 4))
def test_text_round_trip_nfa(seed, n, m):
    a = random_nfa(seed, n, m)
    b = loads_text(dumps_text(a))
    assert sorted(b.transitions()) == sorted(a.transitions())
    assert (b.initial, b.accepting, b.num_states) == (a.initial, a.accepting, a.num_states)


def test_text_binary_text_lossless(tmp_path):
    d = random_dfa(9, 20, 3, density=0.6)
    write_automaton(d, tmp_path / "a.fsa")
    write_automaton(read_automaton(tmp_path / "a.fsa"), tmp_path / "a.fsad")
    write_automaton(read_automaton(tmp_path / "a.fsad"), tmp_path / "b.fsa")
    back = read_automaton(tmp_path / "b.fsa")
    assert canonical_renumber(back) == canonical_renumber(d)
    assert (tmp_path / "a.fsa").read_text() == (tmp_path / "b.fsa").read_text()


def test_packed_header(tmp_path):
    d = random_dfa(1, 10, 3)
    write_automaton(d, tmp_path / "x.fsad")
    h = read_packed_header(tmp_path / "x.fsad")
    assert (h.m, h.n, h.initial) == (3, 10, d.initial)
    assert h.size == (tmp_path / "x.fsad").stat().st_size


def test_text_comments_and_dfa_kind():
    text = """# two states
fsa dfa
alphabet 2
states 2
initial 0
accepting 1 1
transitions 2
0 0 1  # a
1 1 0
"""
    d = loads_text(text)
    assert isinstance(d, Dfa)
    assert d.table.tolist()[0][0] == 1


@pytest.mark.parametrize("text", [
    "",
    "fsa xyz\n",
    "fsa nfa\nalphabet 2\nstates 2\ninitial 0\naccepting 1 0\ntransitions 1\n0 0\n",
    "fsa nfa\nalphabet 2\nstates 2\ninitial 0\naccepting 1 0\ntransitions 2\n0 0 1\n",
    "fsa nfa\nalphabet 2\nstates 2\ninitial 0\naccepting 1 0\ntransitions 1\n0 5 1\n",
])
def test_text_rejects_malformed(text):
    with pytest.raises(InputError):
        loads_text(text)


def test_packed_rejects_truncation_and_magic():
    data = dumps_packed(random_dfa(2, 5, 2))
    with pytest.raises(InputError):
        loads_packed(data[:-3])
    with pytest.raises(InputError):
        loads_packed(b"XXXX" + data[4:])


def test_packed_nfa_refused(tmp_path):
    with pytest.raises(InputError):
        write_automaton(random_nfa(0, 3, 2), tmp_path / "n.fsad")


def test_undefined_survives_packed():
    d = Dfa.from_transitions(2, 2, 0, [1], [(0, 0, 1)])
    back = loads_packed(dumps_packed(d))
    assert np.array_equal(back.table, d.table)
