"""Input checks shared by the estimators, the pipeline runner and the CLI."""

from __future__ import annotations

import numbers

from ._errors import InputError
from .core import Dfa, Nfa

ENGINES = ("seq", "mt", "ooc")


def check_nfa(obj, allow_dfa=True) -> Nfa:
    """Return ``obj`` as an :class:`Nfa`; a :class:`Dfa` is converted if allowed."""
    if isinstance(obj, Nfa):
        return obj
    if allow_dfa and isinstance(obj, Dfa):
        return obj.to_nfa()
    raise InputError(f"expected an Nfa, got {type(obj).__name__}")


def check_dfa(obj) -> Dfa:
    if isinstance(obj, Dfa):
        return obj
    raise InputError(f"expected a Dfa, got {type(obj).__name__}")


def check_automata(X, kind):
    """Validate a collection of automata; ``kind`` is ``"nfa"`` or ``"dfa"``."""
    if isinstance(X, (Nfa, Dfa)):
        raise InputError("expected a sequence of automata; wrap a single automaton in a list")
    try:
        items = list(X)
    except TypeError:
        raise InputError(f"expected a sequence of automata, got {type(X).__name__}") from None
    check = check_nfa if kind == "nfa" else check_dfa
    return [check(a) for a in items]


def check_int(name, value, minimum=None, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise InputError(f"{name} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise InputError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_choice(name, value, choices):
    if value not in choices:
        raise InputError(f"{name} must be one of {tuple(choices)}, got {value!r}")
    return value
