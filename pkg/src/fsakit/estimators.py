"""scikit-learn style transformers over sequences of automata.

Each transformer maps a list of automata to a list of automata, so they
compose with :class:`sklearn.pipeline.Pipeline`::

    Pipeline([("det", Determinizer()), ("min", Minimizer(algo="hopcroft"))])

They are stateless: ``fit`` only validates parameters.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from sklearn.base import BaseEstimator, TransformerMixin

from .core import dfa_complement, reverse
from .determinize import POLICIES, determinize, determinize_mt
from .minimize import MINIMIZERS, minimize_forward_mt
from .ooc import OocConfig, ooc_determinize, ooc_minimize
from .validation import ENGINES, check_automata, check_choice, check_int

__all__ = ["Determinizer", "Minimizer", "Complementer", "Reverser"]


class _AutomatonTransformer(TransformerMixin, BaseEstimator):
    _input_kind = "nfa"

    def _validate(self):
        pass

    def fit(self, X, y=None):
        self._validate()
        check_automata(X, self._input_kind)
        self.is_fitted_ = True
        return self

    def transform(self, X):
        self._validate()
        return [self._one(a) for a in check_automata(X, self._input_kind)]

    def __sklearn_is_fitted__(self):
        return True


class Determinizer(_AutomatonTransformer):
    """Subset construction on each automaton.

    Parameters
    ----------
    engine : {"seq", "mt", "ooc"}
    policy : {"drop", "keep"}
        Whether empty successor sets become undefined transitions or a sink.
    workers : int
        Threads for ``mt``, partitions for ``ooc``.
    partitions : int or None
        Lock stripes of the ``mt`` visited table.
    max_states : int or None
    ooc_config : OocConfig or None
        Overrides ``workers`` for the ``ooc`` engine.
    """

    def __init__(self, engine="seq", policy="drop", workers=4, partitions=None,
                 max_states=None, ooc_config=None):
        self.engine = engine
        self.policy = policy
        self.workers = workers
        self.partitions = partitions
        self.max_states = max_states
        self.ooc_config = ooc_config

    def _validate(self):
        check_choice("engine", self.engine, ENGINES)
        check_choice("policy", self.policy, POLICIES)
        check_int("workers", self.workers, 1)
        check_int("partitions", self.partitions, self.workers, allow_none=True)
        check_int("max_states", self.max_states, 1, allow_none=True)

    def _one(self, nfa):
        if self.engine == "seq":
            return determinize(nfa, self.policy, self.max_states)[0]
        if self.engine == "mt":
            return determinize_mt(nfa, self.workers, self.partitions, self.policy, self.max_states)[0]
        cfg = self.ooc_config or OocConfig(workers=self.workers)
        with tempfile.TemporaryDirectory(dir=cfg.tmpdir) as tmp:
            return ooc_determinize(nfa, cfg, self.policy, self.max_states,
                                   workdir=Path(tmp) / "run").load()


class Minimizer(_AutomatonTransformer):
    """Minimal complete DFA of each input DFA.

    ``algo`` is ``forward``, ``hopcroft`` or ``brzozowski``; the ``mt`` and
    ``ooc`` engines exist for ``forward`` only.  ``trim=True`` drops the
    rejecting sink.
    """

    _input_kind = "dfa"

    def __init__(self, algo="forward", engine="seq", workers=4, trim=False, ooc_config=None):
        self.algo = algo
        self.engine = engine
        self.workers = workers
        self.trim = trim
        self.ooc_config = ooc_config

    def _validate(self):
        check_choice("algo", self.algo, tuple(MINIMIZERS))
        check_choice("engine", self.engine, ENGINES)
        check_int("workers", self.workers, 1)
        if self.engine != "seq":
            check_choice(f"algo for engine {self.engine!r}", self.algo, ("forward",))

    def _one(self, dfa):
        if self.engine == "mt":
            return minimize_forward_mt(dfa, self.workers, trim=self.trim)
        if self.engine == "ooc":
            cfg = self.ooc_config or OocConfig(workers=self.workers)
            with tempfile.TemporaryDirectory(dir=cfg.tmpdir) as tmp:
                return ooc_minimize(dfa, cfg, workdir=Path(tmp) / "run", trim=self.trim)
        return MINIMIZERS[self.algo](dfa, trim=self.trim)


class Complementer(_AutomatonTransformer):
    """Complement of each DFA (completed first)."""

    _input_kind = "dfa"

    def _one(self, dfa):
        return dfa_complement(dfa)


class Reverser(_AutomatonTransformer):
    """Reversal of each automaton, as an NFA."""

    def _one(self, automaton):
        return reverse(automaton)
