"""Seeded random automata and a few classic fixed automata."""

from __future__ import annotations

import numpy as np

from .core import UNDEFINED, Dfa, Nfa

__all__ = [
    "random_dfa",
    "random_nfa",
    "ends_with_ab",
    "kth_from_end",
    "universal_dfa",
]


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_dfa(seed, num_states, alphabet_size, density=1.0, accept_prob=0.5) -> Dfa:
    """Uniform successors; each transition defined with probability ``density``."""
    rng = _rng(seed)
    table = rng.integers(0, num_states, (num_states, alphabet_size))
    if density < 1.0:
        table[rng.random((num_states, alphabet_size)) >= density] = UNDEFINED
    acc = rng.random(num_states) < accept_prob
    return Dfa(alphabet_size, num_states, 0, acc, table)


def random_nfa(seed, num_states, alphabet_size, density=None, accept_prob=0.3) -> Nfa:
    """Each possible triple is present with probability ``density``.

    The default density gives about 1.5 successors per (state, label).
    """
    rng = _rng(seed)
    if density is None:
        density = min(1.0, 1.5 / num_states)
    present = rng.random((num_states, alphabet_size, num_states)) < density
    q, a, r = np.nonzero(present)
    acc = np.flatnonzero(rng.random(num_states) < accept_prob)
    return Nfa(alphabet_size, num_states, 0, acc.tolist(), zip(q.tolist(), a.tolist(), r.tolist()))


def ends_with_ab() -> Nfa:
    """Words over {a=0, b=1} ending in ``ab``."""
    return Nfa(2, 3, 0, [2], [(0, 0, 0), (0, 0, 1), (0, 1, 0), (1, 1, 2)])


def kth_from_end(k: int) -> Nfa:
    """Words over {a=0, b=1} whose k-th symbol from the end is ``a``.

    ``k + 1`` states; its DFA needs ``2**k`` states.
    """
    triples = [(0, 0, 0), (0, 1, 0), (0, 0, 1)]
    for i in range(1, k):
        triples += [(i, 0, i + 1), (i, 1, i + 1)]
    return Nfa(2, k + 1, 0, [k], triples)


def universal_dfa(alphabet_size=2) -> Dfa:
    return Dfa(alphabet_size, 1, 0, [0], np.zeros((1, alphabet_size), dtype=np.int64))
