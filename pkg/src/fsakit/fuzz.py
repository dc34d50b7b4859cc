"""Randomized cross-checks of every engine tier and minimizer."""

from __future__ import annotations

import itertools
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import Dfa, dfa_accepts, dfa_complete, equivalent, nfa_accepts
from .determinize import determinize, determinize_mt
from .generators import random_dfa, random_nfa
from .io import dumps_packed, dumps_text
from .minimize import minimize_brzozowski, minimize_forward, minimize_forward_mt, minimize_hopcroft
from .ooc import OocConfig, ooc_determinize, ooc_minimize
from .validation import check_int


@dataclass
class FuzzLimits:
    max_states: int = 10
    max_alphabet: int = 3
    word_length: int = 6
    dfa_density: float = 0.7


@dataclass
class Verdict:
    seed: int
    cases: int
    failures: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.failures

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def default_minimizers(workers=4, ooc_config=None):
    out = {
        "forward": minimize_forward,
        "forward-mt": lambda d: minimize_forward_mt(d, workers),
        "hopcroft": minimize_hopcroft,
        "brzozowski": minimize_brzozowski,
    }
    if ooc_config is not None:
        def ooc(d):
            with tempfile.TemporaryDirectory(dir=ooc_config.tmpdir) as tmp:
                return ooc_minimize(d, ooc_config, workdir=Path(tmp) / "run")
        out["forward-ooc"] = ooc
    return out


def _words(m, length):
    for n in range(length + 1):
        yield from itertools.product(range(m), repeat=n)


def _case(seed, i, limits):
    rng = np.random.default_rng([seed, i])
    n = int(rng.integers(1, limits.max_states + 1))
    m = int(rng.integers(1, limits.max_alphabet + 1))
    if i % 2:
        return random_dfa(rng, n, m, density=limits.dfa_density).to_nfa()
    return random_nfa(rng, n, m)


def fuzz_equivalence(seed: int, cases: int, limits: FuzzLimits | None = None, minimizers=None,
                     engines=("seq", "mt", "ooc"), workers=4, ooc_config=None) -> Verdict:
    """Generate ``cases`` random automata and cross-check all tiers.

    Odd cases are random partial DFAs (given as NFAs), even cases random
    NFAs.  Checks: determinization is byte-identical across ``engines``;
    the DFA agrees with the NFA on every word up to ``word_length``; each
    minimizer returns exactly the forward-refinement result and that result
    is equivalent to the DFA.  Failures carry the input in text format.
    """
    check_int("cases", cases, 0)
    limits = limits or FuzzLimits()
    if "ooc" in engines and ooc_config is None:
        ooc_config = OocConfig(workers=workers, buffer_bytes=64 << 10)
    if minimizers is None:
        minimizers = default_minimizers(workers, ooc_config if "ooc" in engines else None)
    verdict = Verdict(seed, cases)

    def fail(i, check, detail, nfa):
        verdict.failures.append({"case": i, "check": check, "detail": detail,
                                 "automaton": dumps_text(nfa)})

    for i in range(cases):
        nfa = _case(seed, i, limits)
        dfa, _ = determinize(nfa)
        packed = dumps_packed(dfa)
        if "mt" in engines and dumps_packed(determinize_mt(nfa, workers)[0]) != packed:
            fail(i, "determinize-mt", "differs from sequential output", nfa)
        if "ooc" in engines:
            with tempfile.TemporaryDirectory(dir=ooc_config.tmpdir) as tmp:
                got = ooc_determinize(nfa, ooc_config, workdir=Path(tmp) / "run").read_bytes()
            if got != packed:
                fail(i, "determinize-ooc", "differs from sequential output", nfa)
        for w in _words(nfa.alphabet_size, limits.word_length):
            if dfa_accepts(dfa, w) != nfa_accepts(nfa, w):
                fail(i, "language", f"disagree on word {list(w)}", nfa)
                break
        reference = minimize_forward(dfa)
        if not equivalent(reference, dfa):
            fail(i, "minimize-equivalence", "forward result not equivalent to input", nfa)
        if reference.num_states > dfa_complete(dfa).num_states:
            fail(i, "minimize-size", "minimal DFA larger than input", nfa)
        for name, fn in minimizers.items():
            try:
                got = fn(dfa)
            except Exception as exc:  # a crashing minimizer is a finding, not an abort
                fail(i, f"minimize-{name}", f"raised {type(exc).__name__}: {exc}", nfa)
                continue
            if not isinstance(got, Dfa) or got != reference:
                fail(i, f"minimize-{name}", "differs from forward refinement", nfa)
    return verdict
