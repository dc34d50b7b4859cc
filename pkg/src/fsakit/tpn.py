"""Token passing networks and the automata of their achievable permutations.

A network is a directed graph with an input and an output vertex; every
other vertex is a capacity-1 cell.  Tokens ``1..n`` enter in order at the
input, move one at a time along edges and leave at the output.  A
permutation is achievable when the tokens can leave in its order.

Two views are provided:

* an exact brute-force search over token placements
  (:func:`achievable_brute`, :func:`achievable_permutations`), and
* an NFA over rank-encoded output symbols (:func:`build_achievable_nfa`)
  whose states abstract each token to its relative order among the tokens
  still inside the network.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from ._errors import InputError, ResourceError
from .core import Nfa, nfa_accepts

logger = logging.getLogger(__name__)

__all__ = [
    "accepts_permutation",
    "FAMILIES",
    "NetworkSpec",
    "TokenPassingNetwork",
    "build_network",
    "achievable_brute",
    "achievable_permutations",
    "count_achievable",
    "rank_encode",
    "rank_decode",
    "build_achievable_nfa",
    "contains_pattern",
    "catalan",
]

FAMILIES = ("buffer-stack", "two-stack", "stack")


@dataclass(frozen=True)
class NetworkSpec:
    """``family`` is one of ``buffer-stack``, ``two-stack`` or ``stack``.

    ``buffer`` is only read by ``buffer-stack``.  ``stack`` is a single
    stack of depth ``depth`` and exists mainly for the classic
    stack-sortable checks.
    """

    family: str
    depth: int
    buffer: int = 3

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown network family {self.family!r}; expected one of {FAMILIES}")
        if self.depth < 1 or self.buffer < 1:
            raise InputError("buffer size and stack depth must be at least 1")


@dataclass(frozen=True)
class TokenPassingNetwork:
    num_vertices: int
    edges: tuple
    input: int
    output: int

    def __post_init__(self):
        for u, v in self.edges:
            if not (0 <= u < self.num_vertices and 0 <= v < self.num_vertices):
                raise InputError(f"edge ({u}, {v}) out of range")
            if v == self.input or u == self.output:
                raise InputError("tokens cannot enter the input vertex or leave the output vertex")

    @property
    def cells(self):
        return tuple(v for v in range(self.num_vertices) if v not in (self.input, self.output))

    @property
    def max_tokens(self) -> int:
        return self.num_vertices - 2


def _stack(first, depth):
    cells = list(range(first, first + depth))
    edges = []
    for a, b in zip(cells, cells[1:]):
        edges += [(a, b), (b, a)]
    return cells, edges, [cells[0]], [cells[0]]


def _buffer(first, size):
    cells = list(range(first, first + size))
    return cells, [], cells, cells


def build_network(spec: NetworkSpec) -> TokenPassingNetwork:
    """Wire ``input -> stage1 -> stage2 -> output``.

    A stack of depth ``d`` is a path of ``d`` cells with edges both ways
    between neighbours, entered and left through its top cell.  A buffer of
    size ``b`` is ``b`` unconnected cells, each reachable from the stage
    entry and leading to the stage exit.
    """
    if spec.family == "stack":
        stages = [(_stack, spec.depth)]
    elif spec.family == "two-stack":
        stages = [(_stack, 2), (_stack, spec.depth)]
    else:
        stages = [(_buffer, spec.buffer), (_stack, spec.depth)]
    input_vertex = 0
    edges = []
    nxt = 1
    exits = [input_vertex]
    for build, size in stages:
        cells, inner, entries, stage_exits = build(nxt, size)
        nxt += size
        edges += [(u, v) for u in exits for v in entries]
        edges += inner
        exits = stage_exits
    output_vertex = nxt
    edges += [(u, output_vertex) for u in exits]
    return TokenPassingNetwork(output_vertex + 1, tuple(edges), input_vertex, output_vertex)


def _moves(tpn):
    """Split edges into (entry cells, cell->cell edges, exit cells, direct)."""
    entry = [v for u, v in tpn.edges if u == tpn.input and v != tpn.output]
    exits = [u for u, v in tpn.edges if v == tpn.output and u != tpn.input]
    inner = [(u, v) for u, v in tpn.edges if u != tpn.input and v != tpn.output]
    direct = (tpn.input, tpn.output) in tpn.edges
    return entry, inner, exits, direct


def _check_perm(p):
    p = tuple(int(x) for x in p)
    if sorted(p) != list(range(1, len(p) + 1)):
        raise InputError(f"{p} is not a permutation of 1..{len(p)}")
    return p


def achievable_brute(tpn: TokenPassingNetwork, p) -> bool:
    """Exact search over token placements; tokens keep their identities."""
    p = _check_perm(p)
    n = len(p)
    entry, inner, exits, direct = _moves(tpn)
    start = ((0,) * tpn.num_vertices, 1, 0)
    seen = {start}
    stack = [start]
    while stack:
        place, nxt, out = stack.pop()
        if out == n:
            return True
        succ = []
        if nxt <= n:
            for v in entry:
                if not place[v]:
                    new = list(place)
                    new[v] = nxt
                    succ.append((tuple(new), nxt + 1, out))
            if direct and p[out] == nxt:
                succ.append((place, nxt + 1, out + 1))
        for u, v in inner:
            if place[u] and not place[v]:
                new = list(place)
                new[v], new[u] = place[u], 0
                succ.append((tuple(new), nxt, out))
        for u in exits:
            if place[u] and place[u] == p[out]:
                new = list(place)
                new[u] = 0
                succ.append((tuple(new), nxt, out + 1))
        for s in succ:
            if s not in seen:
                seen.add(s)
                stack.append(s)
    return False


def achievable_permutations(tpn: TokenPassingNetwork, n: int) -> set:
    """All achievable permutations of length ``n``, by forward enumeration of runs."""
    entry, inner, exits, direct = _moves(tpn)
    start = ((0,) * tpn.num_vertices, 1, ())
    seen = {start}
    stack = [start]
    found = set()
    while stack:
        place, nxt, out = stack.pop()
        if len(out) == n:
            found.add(out)
            continue
        succ = []
        if nxt <= n:
            for v in entry:
                if not place[v]:
                    new = list(place)
                    new[v] = nxt
                    succ.append((tuple(new), nxt + 1, out))
            if direct:
                succ.append((place, nxt + 1, out + (nxt,)))
        for u, v in inner:
            if place[u] and not place[v]:
                new = list(place)
                new[v], new[u] = place[u], 0
                succ.append((tuple(new), nxt, out))
        for u in exits:
            if place[u]:
                new = list(place)
                new[u] = 0
                succ.append((tuple(new), nxt, out + (place[u],)))
        for s in succ:
            if s not in seen:
                seen.add(s)
                stack.append(s)
    return found


def count_achievable(tpn: TokenPassingNetwork, n: int) -> int:
    if n > 9:
        raise InputError("brute-force counting is limited to n <= 9")
    return len(achievable_permutations(tpn, n))


def catalan(n: int) -> int:
    return comb(2 * n, n) // (n + 1)


def contains_pattern(p, pattern) -> bool:
    """True if some subsequence of ``p`` is order-isomorphic to ``pattern``."""
    k = len(pattern)
    target = tuple(sorted(range(k), key=lambda i: pattern[i]))
    for idx in itertools.combinations(range(len(p)), k):
        vals = [p[i] for i in idx]
        if tuple(sorted(range(k), key=lambda i: vals[i])) == target:
            return True
    return False


def rank_encode(p) -> tuple:
    """0-based rank of each output value among the values not yet output."""
    p = _check_perm(p)
    remaining = sorted(p)
    word = []
    for x in p:
        r = remaining.index(x)
        word.append(r)
        del remaining[r]
    return tuple(word)


def rank_decode(word, n=None) -> tuple:
    """Inverse of :func:`rank_encode`; ``word`` holds 0-based ranks."""
    word = tuple(int(r) for r in word)
    if n is None:
        n = len(word)
    if len(word) != n:
        raise InputError(f"word of length {len(word)} cannot encode a permutation of {n}")
    remaining = list(range(1, n + 1))
    out = []
    for i, r in enumerate(word):
        if not 0 <= r < len(remaining):
            raise InputError(f"rank {r + 1} at position {i} is infeasible (only {len(remaining)} values left)")
        out.append(remaining.pop(r))
    return tuple(out)


def _rerank(config, removed):
    return tuple(0 if x == 0 else (x - 1 if x > removed else x) for x in config)


def _explore_configs(tpn, cap):
    """All abstract configurations with their silent and emitting moves.

    A configuration is a tuple over the network's cells holding 0 for an
    empty cell or the token's rank (1-based) among the tokens inside.
    """
    cells = tpn.cells
    pos = {v: i for i, v in enumerate(cells)}
    entry, inner, exits, direct = _moves(tpn)
    entry = [pos[v] for v in entry]
    inner = [(pos[u], pos[v]) for u, v in inner]
    exits = [pos[u] for u in exits]

    empty = (0,) * len(cells)
    index = {empty: 0}
    configs = [empty]
    silent = []
    emits = []
    i = 0
    while i < len(configs):
        c = configs[i]
        t = sum(1 for x in c if x)
        s_out, e_out = [], []
        for v in entry:
            if not c[v]:
                new = list(c)
                new[v] = t + 1
                s_out.append(tuple(new))
        for u, v in inner:
            if c[u] and not c[v]:
                new = list(c)
                new[v], new[u] = c[u], 0
                s_out.append(tuple(new))
        for u in exits:
            if c[u]:
                new = list(c)
                new[u] = 0
                e_out.append((c[u] - 1, _rerank(new, c[u])))
        if direct:
            e_out.append((t, c))
        s_ids, e_ids = [], []
        for d in s_out:
            j = index.get(d)
            if j is None:
                j = index[d] = len(configs)
                configs.append(d)
            s_ids.append(j)
        for a, d in e_out:
            j = index.get(d)
            if j is None:
                j = index[d] = len(configs)
                configs.append(d)
            e_ids.append((a, j))
        silent.append(s_ids)
        emits.append(e_ids)
        if len(configs) > cap:
            raise ResourceError(f"network configuration space exceeds the cap of {cap}")
        i += 1
    return configs, silent, emits


def build_achievable_nfa(tpn: TokenPassingNetwork, max_rank=None, cap=2_000_000) -> Nfa:
    """NFA over 0-based rank labels accepting the encodings of achievable permutations.

    Silent token moves are eliminated: configurations that can reach each
    other silently are merged (they share a closure), and every emission
    available anywhere in a state's silent closure becomes a labelled edge.
    The empty network is the single accepting state, so a word is accepted
    exactly when it is the complete encoding of an achievable permutation
    of some length.  Only states reachable from the empty network are kept.
    """
    needed = tpn.max_tokens + 1
    if max_rank is None:
        max_rank = needed
    elif max_rank < tpn.max_tokens:
        raise InputError(f"max_rank {max_rank} cannot express ranks up to {tpn.max_tokens}")

    configs, silent, emits = _explore_configs(tpn, cap)
    k = len(configs)
    rows = np.repeat(np.arange(k), [len(s) for s in silent])
    cols = np.fromiter(itertools.chain.from_iterable(silent), dtype=np.int64, count=rows.size)
    graph = csr_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(k, k))
    n_comp, comp = connected_components(graph, directed=True, connection="strong")

    # Silent moves never remove tokens, so sorting components by their token
    # count, largest first, is a reverse topological order of the condensation.
    tokens = np.array([sum(1 for x in c if x) for c in configs])
    comp_tokens = np.zeros(n_comp, dtype=np.int64)
    comp_tokens[comp] = tokens
    members = [[] for _ in range(n_comp)]
    for c, s in enumerate(comp.tolist()):
        members[s].append(c)

    closure = [None] * n_comp
    for s in sorted(range(n_comp), key=lambda s: -comp_tokens[s]):
        own = set()
        below = set()
        for c in members[s]:
            for a, d in emits[c]:
                own.add((a, int(comp[d])))
            for d in silent[c]:
                t = int(comp[d])
                if t != s:
                    below.add(t)
        for t in below:
            own |= closure[t]
        closure[s] = frozenset(own)

    start = int(comp[0])
    state_of = {start: 0}
    order = [start]
    triples = []
    i = 0
    while i < len(order):
        s = order[i]
        for a, t in sorted(closure[s]):
            j = state_of.get(t)
            if j is None:
                j = state_of[t] = len(order)
                order.append(t)
            triples.append((i, a, j))
        i += 1

    return Nfa(max_rank, len(order), 0, [0], triples)


def accepts_permutation(nfa: Nfa, p) -> bool:
    """Whether ``nfa`` accepts the rank encoding of ``p``.

    A code using a rank outside the alphabet needs more simultaneous tokens
    than the network holds, so it is rejected rather than treated as an error.
    """
    word = rank_encode(p)
    if word and max(word) >= nfa.alphabet_size:
        return False
    return nfa_accepts(nfa, word)


def reference_label_count(spec: NetworkSpec) -> int:
    """Label count the reference tables list for the buffer-stack family (depth + 2)."""
    return spec.depth + 2


def check_alphabet_bound(spec: NetworkSpec, tpn: TokenPassingNetwork) -> int:
    """Return the computed alphabet bound, warning when it differs from the reference shape."""
    bound = tpn.max_tokens + 1
    if spec.family == "buffer-stack" and bound != reference_label_count(spec):
        logger.warning(
            "alphabet bound %d for buffer=%d depth=%d differs from the reference label count %d",
            bound, spec.buffer, spec.depth, reference_label_count(spec),
        )
    return bound
