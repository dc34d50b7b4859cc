import itertools
from pathlib import Path

import numpy as np
import pytest

from fsakit import UNDEFINED, Dfa, Nfa, OocConfig


def words(m, max_len):
    for n in range(max_len + 1):
        yield from itertools.product(range(m), repeat=n)


def path_search_accepts(nfa: Nfa, word):
    """Accept by explicit search over (state, position) pairs."""
    edges = {}
    for q, a, r in nfa.transitions():
        edges.setdefault((q, a), []).append(r)
    stack, seen = [(nfa.initial, 0)], set()
    while stack:
        q, i = stack.pop()
        if (q, i) in seen:
            continue
        seen.add((q, i))
        if i == len(word):
            if q in nfa.accepting:
                return True
            continue
        for r in edges.get((q, word[i]), ()):
            stack.append((r, i + 1))
    return False


def first_disagreement(nfa: Nfa, dfa: Dfa, max_len):
    """Walk the word trie once; return the first word where the two disagree, else None."""
    table = dfa.table
    acc = nfa.accepting
    dacc = dfa.accepting_mask
    m = nfa.alphabet_size
    stack = [((), frozenset([nfa.initial]), dfa.initial)]
    while stack:
        w, states, q = stack.pop()
        want = any(s in acc for s in states)
        got = q != UNDEFINED and bool(dacc[q])
        if want != got:
            return list(w)
        if len(w) == max_len:
            continue
        for a in range(m):
            nxt = frozenset(r for s in states for r in nfa.successors(s, a))
            qa = UNDEFINED if q == UNDEFINED else int(table[q, a])
            stack.append((w + (a,), nxt, qa))
    return None


def distinguishable_pairs(dfa: Dfa):
    """Table-filling over a complete DFA; returns the set of distinguishable pairs."""
    n, m = dfa.num_states, dfa.alphabet_size
    acc = dfa.accepting_mask
    table = dfa.table
    marked = {(i, j) for i in range(n) for j in range(i + 1, n) if acc[i] != acc[j]}
    changed = True
    while changed:
        changed = False
        for i in range(n):
            for j in range(i + 1, n):
                if (i, j) in marked:
                    continue
                for a in range(m):
                    x, y = sorted((int(table[i, a]), int(table[j, a])))
                    if x != y and (x, y) in marked:
                        marked.add((i, j))
                        changed = True
                        break
    return marked


@pytest.fixture
def ooc_cfg(tmp_path):
    return OocConfig(workers=2, buffer_bytes=64 << 10, tmpdir=str(tmp_path))


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


@pytest.fixture
def workdir(tmp_path) -> Path:
    return tmp_path / "run"


# --- acceptance summary --------------------------------------------------
# Tests marked ``acceptance(name)`` get one PASS/FAIL/SKIP line in the
# terminal summary, taken from the real outcome plus the ``detail``
# property the test recorded.

_ACCEPTANCE = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(name): headline acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or rep.when != "call":
        return
    detail = dict(item.user_properties).get("detail", "")
    if rep.skipped:
        status = "SKIP"
        detail = rep.longrepr[2] if isinstance(rep.longrepr, tuple) else detail
    else:
        status = "PASS" if rep.passed else "FAIL"
    _ACCEPTANCE.append((status, marker.args[0], detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for status, name, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{status:<4}  {name}: {detail}")
