"""Automaton data model and the closure operations built on it.

Labels are dense integers ``0..m-1``.  An :class:`Nfa` stores, for each
state and label, a sorted tuple of successors.  A :class:`Dfa` stores a
``(num_states, alphabet_size)`` integer table where ``-1`` marks an
undefined transition, so partial DFAs are first-class and completion is an
explicit call (:func:`dfa_complete`).

Both types are immutable once constructed and safe to share between
threads.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from ._errors import InputError

__all__ = [
    "UNDEFINED",
    "Nfa",
    "Dfa",
    "nfa_accepts",
    "dfa_accepts",
    "dfa_complete",
    "dfa_complement",
    "dfa_trim",
    "reverse",
    "intersect",
    "isomorphic",
    "equivalent",
    "canonical_renumber",
]

UNDEFINED = -1


def _check_word(word, alphabet_size):
    word = tuple(int(a) for a in word)
    for a in word:
        if a < 0 or a >= alphabet_size:
            raise InputError(f"label {a} out of range for alphabet of size {alphabet_size}")
    return word


class Nfa:
    """Nondeterministic automaton without epsilon transitions.

    Parameters
    ----------
    alphabet_size : int
        Number of labels; labels are ``0..alphabet_size-1``.
    num_states : int
        Number of states (at least 1).
    initial : int
        The single initial state.
    accepting : iterable of int
        Accepting state ids.
    transitions : iterable of (src, label, dst)
        Transition triples.  Duplicates are ignored.
    """

    __slots__ = ("_m", "_n", "_initial", "_accepting", "_delta")

    def __init__(self, alphabet_size, num_states, initial, accepting, transitions=()):
        m, n, initial = int(alphabet_size), int(num_states), int(initial)
        if m < 0:
            raise InputError("alphabet_size must be non-negative")
        if n < 1:
            raise InputError("an automaton needs at least one state")
        if not 0 <= initial < n:
            raise InputError(f"initial state {initial} out of range")
        acc = frozenset(int(q) for q in accepting)
        if any(not 0 <= q < n for q in acc):
            raise InputError("accepting state out of range")
        rows = [[set() for _ in range(m)] for _ in range(n)]
        for src, label, dst in transitions:
            src, label, dst = int(src), int(label), int(dst)
            if not (0 <= src < n and 0 <= dst < n):
                raise InputError(f"transition ({src}, {label}, {dst}) has an endpoint out of range")
            if not 0 <= label < m:
                raise InputError(f"transition ({src}, {label}, {dst}) has a label out of range")
            rows[src][label].add(dst)
        self._m = m
        self._n = n
        self._initial = initial
        self._accepting = acc
        self._delta = tuple(tuple(tuple(sorted(cell)) for cell in row) for row in rows)

    @property
    def alphabet_size(self) -> int:
        return self._m

    @property
    def num_states(self) -> int:
        return self._n

    @property
    def initial(self) -> int:
        return self._initial

    @property
    def accepting(self) -> frozenset:
        return self._accepting

    @property
    def delta(self):
        """``delta[state][label]`` is the sorted tuple of successors."""
        return self._delta

    def successors(self, state, label):
        return self._delta[state][label]

    def transitions(self):
        """Yield ``(src, label, dst)`` triples in sorted order."""
        for q, row in enumerate(self._delta):
            for a, cell in enumerate(row):
                for r in cell:
                    yield q, a, r

    @property
    def num_transitions(self) -> int:
        return sum(len(cell) for row in self._delta for cell in row)

    def __eq__(self, other):
        if not isinstance(other, Nfa):
            return NotImplemented
        return (
            self._m == other._m
            and self._n == other._n
            and self._initial == other._initial
            and self._accepting == other._accepting
            and self._delta == other._delta
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"Nfa(alphabet_size={self._m}, num_states={self._n}, initial={self._initial}, "
            f"accepting={sorted(self._accepting)}, transitions={self.num_transitions})"
        )


class Dfa:
    """Deterministic automaton backed by a dense successor table.

    ``table[q, a]`` is the successor of ``q`` on ``a`` or :data:`UNDEFINED`.
    ``accepting`` may be an iterable of ids or a boolean mask of length
    ``num_states``.
    """

    __slots__ = ("_m", "_n", "_initial", "_table", "_acc")

    def __init__(self, alphabet_size, num_states, initial, accepting, table):
        m, n, initial = int(alphabet_size), int(num_states), int(initial)
        if n < 1:
            raise InputError("an automaton needs at least one state")
        if not 0 <= initial < n:
            raise InputError(f"initial state {initial} out of range")
        table = np.array(table, dtype=np.int64).reshape(n, m)
        if table.size and (table.min() < UNDEFINED or table.max() >= n):
            raise InputError("transition target out of range")
        acc = np.asarray(accepting)
        if acc.dtype == bool and acc.shape == (n,):
            mask = acc.copy()
        else:
            mask = np.zeros(n, dtype=bool)
            ids = np.fromiter((int(q) for q in accepting), dtype=np.int64)
            if ids.size and (ids.min() < 0 or ids.max() >= n):
                raise InputError("accepting state out of range")
            mask[ids] = True
        table.flags.writeable = False
        mask.flags.writeable = False
        self._m = m
        self._n = n
        self._initial = initial
        self._table = table
        self._acc = mask

    @classmethod
    def from_transitions(cls, alphabet_size, num_states, initial, accepting, transitions):
        """Build from ``(src, label, dst)`` triples; conflicting triples raise."""
        table = np.full((int(num_states), int(alphabet_size)), UNDEFINED, dtype=np.int64)
        for src, label, dst in transitions:
            if not (0 <= src < num_states and 0 <= label < alphabet_size and 0 <= dst < num_states):
                raise InputError(f"transition ({src}, {label}, {dst}) out of range")
            if table[src, label] not in (UNDEFINED, dst):
                raise InputError(f"state {src} has two successors on label {label}")
            table[src, label] = dst
        return cls(alphabet_size, num_states, initial, accepting, table)

    @property
    def alphabet_size(self) -> int:
        return self._m

    @property
    def num_states(self) -> int:
        return self._n

    @property
    def initial(self) -> int:
        return self._initial

    @property
    def table(self) -> np.ndarray:
        return self._table

    @property
    def accepting_mask(self) -> np.ndarray:
        return self._acc

    @property
    def accepting(self) -> frozenset:
        return frozenset(np.flatnonzero(self._acc).tolist())

    @property
    def is_complete(self) -> bool:
        return bool((self._table != UNDEFINED).all())

    def successor(self, state, label):
        r = int(self._table[state, label])
        return None if r == UNDEFINED else r

    def transitions(self):
        qs, labels = np.nonzero(self._table != UNDEFINED)
        for q, a in zip(qs.tolist(), labels.tolist()):
            yield q, a, int(self._table[q, a])

    def to_nfa(self) -> Nfa:
        return Nfa(self._m, self._n, self._initial, self.accepting, self.transitions())

    def __eq__(self, other):
        if not isinstance(other, Dfa):
            return NotImplemented
        return (
            self._m == other._m
            and self._n == other._n
            and self._initial == other._initial
            and np.array_equal(self._acc, other._acc)
            and np.array_equal(self._table, other._table)
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"Dfa(alphabet_size={self._m}, num_states={self._n}, initial={self._initial}, "
            f"accepting={int(self._acc.sum())} states, complete={self.is_complete})"
        )


def nfa_accepts(nfa: Nfa, word: Sequence[int]) -> bool:
    """Simulate ``nfa`` on ``word`` by tracking the reachable state set."""
    word = _check_word(word, nfa.alphabet_size)
    current = {nfa.initial}
    delta = nfa.delta
    for a in word:
        nxt = set()
        for q in current:
            nxt.update(delta[q][a])
        if not nxt:
            return False
        current = nxt
    return not current.isdisjoint(nfa.accepting)


def dfa_accepts(dfa: Dfa, word: Sequence[int]) -> bool:
    word = _check_word(word, dfa.alphabet_size)
    q = dfa.initial
    table = dfa.table
    for a in word:
        q = int(table[q, a])
        if q == UNDEFINED:
            return False
    return bool(dfa.accepting_mask[q])


def dfa_complete(dfa: Dfa) -> Dfa:
    """Return ``dfa`` itself if complete, else a copy with one rejecting sink."""
    if dfa.is_complete:
        return dfa
    n = dfa.num_states
    table = np.vstack([dfa.table, np.full((1, dfa.alphabet_size), n, dtype=np.int64)])
    table[table == UNDEFINED] = n
    acc = np.append(dfa.accepting_mask, False)
    return Dfa(dfa.alphabet_size, n + 1, dfa.initial, acc, table)


def dfa_complement(dfa: Dfa) -> Dfa:
    full = dfa_complete(dfa)
    return Dfa(full.alphabet_size, full.num_states, full.initial, ~full.accepting_mask, full.table)


def _coreachable(dfa: Dfa) -> np.ndarray:
    """Mask of states from which some accepting state is reachable."""
    n, m = dfa.num_states, dfa.alphabet_size
    src = np.repeat(np.arange(n), m)
    dst = dfa.table.reshape(-1)
    keep = dst != UNDEFINED
    src, dst = src[keep], dst[keep]
    order = np.argsort(dst, kind="stable")
    src, dst = src[order], dst[order]
    starts = np.searchsorted(dst, np.arange(n + 1))
    alive = dfa.accepting_mask.copy()
    stack = np.flatnonzero(alive).tolist()
    while stack:
        q = stack.pop()
        for p in src[starts[q]:starts[q + 1]].tolist():
            if not alive[p]:
                alive[p] = True
                stack.append(p)
    return alive


def dfa_trim(dfa: Dfa) -> Dfa:
    """Drop states that cannot reach acceptance, turning edges into them undefined.

    The result is canonically renumbered.  An empty language yields the
    one-state rejecting DFA with no transitions.
    """
    alive = _coreachable(dfa)
    if not alive[dfa.initial]:
        return Dfa(dfa.alphabet_size, 1, 0, [], np.full((1, dfa.alphabet_size), UNDEFINED))
    table = dfa.table.copy()
    dead_target = (table != UNDEFINED) & ~alive[np.maximum(table, 0)]
    table[dead_target] = UNDEFINED
    return canonical_renumber(Dfa(dfa.alphabet_size, dfa.num_states, dfa.initial, dfa.accepting_mask, table))


def reverse(automaton) -> Nfa:
    """NFA for the reversed language.

    With exactly one accepting state that state becomes the new initial
    state.  Otherwise a fresh initial state is added carrying copies of the
    reversed out-edges of every former accepting state; it is accepting iff
    the input accepts the empty word.
    """
    nfa = automaton.to_nfa() if isinstance(automaton, Dfa) else automaton
    n = nfa.num_states
    triples = [(r, a, q) for q, a, r in nfa.transitions()]
    if len(nfa.accepting) == 1:
        (start,) = nfa.accepting
        return Nfa(nfa.alphabet_size, n, start, [nfa.initial], triples)
    fresh = n
    extra = [(fresh, a, q) for r, a, q in triples if r in nfa.accepting]
    accepting = {nfa.initial}
    if nfa.initial in nfa.accepting:
        accepting.add(fresh)
    return Nfa(nfa.alphabet_size, n + 1, fresh, accepting, triples + extra)


def _check_same_alphabet(a, b):
    if a.alphabet_size != b.alphabet_size:
        raise InputError(f"alphabet mismatch: {a.alphabet_size} vs {b.alphabet_size}")


def _product(a: Dfa, b: Dfa):
    """Reachable product of two DFAs in BFS order.

    Returns ``(pairs, table)`` where ``pairs`` is an ``(k, 2)`` array of
    state pairs and ``table`` the product successor table (``-1`` when
    either side is undefined).
    """
    m = a.alphabet_size
    nb = b.num_states
    ta, tb = a.table, b.table
    start = a.initial * nb + b.initial
    ids = {start: 0}
    codes = [start]
    rows = []
    i = 0
    while i < len(codes):
        c = codes[i]
        p, q = divmod(c, nb)
        ra, rb = ta[p], tb[q]
        row = []
        for x in range(m):
            s, t = int(ra[x]), int(rb[x])
            if s == UNDEFINED or t == UNDEFINED:
                row.append(UNDEFINED)
                continue
            code = s * nb + t
            j = ids.get(code)
            if j is None:
                j = ids[code] = len(codes)
                codes.append(code)
            row.append(j)
        rows.append(row)
        i += 1
    pairs = np.array([divmod(c, nb) for c in codes], dtype=np.int64).reshape(-1, 2)
    table = np.array(rows, dtype=np.int64).reshape(len(codes), m)
    return pairs, table


def intersect(a: Dfa, b: Dfa) -> Dfa:
    """Product automaton restricted to pairs reachable from the initial pair."""
    _check_same_alphabet(a, b)
    pairs, table = _product(a, b)
    acc = a.accepting_mask[pairs[:, 0]] & b.accepting_mask[pairs[:, 1]]
    return Dfa(a.alphabet_size, len(pairs), 0, acc, table)


def equivalent(a: Dfa, b: Dfa) -> bool:
    """Language equality via emptiness of the symmetric difference."""
    _check_same_alphabet(a, b)
    pairs, _ = _product(dfa_complete(a), dfa_complete(b))
    fa = dfa_complete(a).accepting_mask[pairs[:, 0]]
    fb = dfa_complete(b).accepting_mask[pairs[:, 1]]
    return bool(np.array_equal(fa, fb))


def canonical_renumber(d: Dfa) -> Dfa:
    """Renumber states in BFS order from the initial state, labels ascending.

    Unreachable states are dropped.  Two DFAs are isomorphic exactly when
    their canonical forms are equal.
    """
    n, m = d.num_states, d.alphabet_size
    table = d.table
    new_id = np.full(n, -1, dtype=np.int64)
    new_id[d.initial] = 0
    order = [np.array([d.initial], dtype=np.int64)]
    count = 1
    frontier = order[0]
    while frontier.size:
        succ = table[frontier].reshape(-1)
        succ = succ[succ != UNDEFINED]
        succ = succ[new_id[succ] < 0]
        if not succ.size:
            break
        _, first = np.unique(succ, return_index=True)
        fresh = succ[np.sort(first)]
        new_id[fresh] = np.arange(count, count + fresh.size)
        count += fresh.size
        order.append(fresh)
        frontier = fresh
    old = np.concatenate(order)
    sub = table[old]
    out = np.where(sub == UNDEFINED, UNDEFINED, new_id[np.maximum(sub, 0)])
    return Dfa(m, count, 0, d.accepting_mask[old], out)


def isomorphic(a: Dfa, b: Dfa) -> bool:
    if a.alphabet_size != b.alphabet_size:
        return False
    return canonical_renumber(a) == canonical_renumber(b)

