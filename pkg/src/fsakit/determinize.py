"""Subset construction.

Two execution tiers share one contract:

* :func:`determinize` runs a level-synchronous breadth-first search.  Each
  level is expanded in full, then de-duplicated in one batch against itself
  and the visited table, so state ids come out in BFS order and the output
  is already canonical.
* :func:`determinize_mt` lets several threads explore depth-first from a
  shared work pool, de-duplicating through a partitioned visited table.
  Its ids are provisional and are compacted by a final canonical
  renumbering.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._errors import InputError, ResourceError
from ._striped import PartitionedTable
from .core import UNDEFINED, Dfa, Nfa, canonical_renumber

logger = logging.getLogger(__name__)

__all__ = [
    "POLICIES",
    "SubsetRun",
    "subset_construction",
    "determinize",
    "determinize_mt",
    "subset_stats",
]

POLICIES = ("drop", "keep")

# Bitmask keys are cheap to OR and hash but cost num_states bits each.
_BITMASK_LIMIT = 1 << 14
_ID_BITS = 40


def _check_policy(policy):
    aliases = {"drop-empty-set": "drop", "keep-empty-set": "keep"}
    policy = aliases.get(policy, policy)
    if policy not in POLICIES:
        raise InputError(f"unknown empty-set policy {policy!r}")
    return policy


class _BitsetKernel:
    """Subsets as Python ints with bit ``q`` set for member ``q``."""

    def __init__(self, nfa: Nfa):
        self.m = nfa.alphabet_size
        self.masks = [
            [sum(1 << r for r in cell) for cell in row] for row in nfa.delta
        ]
        acc = 0
        for q in nfa.accepting:
            acc |= 1 << q
        self.acc = acc
        self.start = 1 << nfa.initial
        self.empty = 0

    def key(self, states):
        k = 0
        for q in states:
            k |= 1 << int(q)
        return k

    def expand(self, key):
        rows = []
        x = key
        masks = self.masks
        while x:
            low = x & -x
            rows.append(masks[low.bit_length() - 1])
            x ^= low
        out = []
        for a in range(self.m):
            acc = 0
            for row in rows:
                acc |= row[a]
            out.append(acc)
        return out

    def accepting(self, key):
        return bool(key & self.acc)

    def members(self, key):
        out = []
        while key:
            low = key & -key
            out.append(low.bit_length() - 1)
            key ^= low
        return tuple(out)

    def size(self, key):
        return bin(key).count("1")


class _TupleKernel:
    """Subsets as sorted tuples, for NFAs too large for bitmask keys."""

    def __init__(self, nfa: Nfa):
        self.m = nfa.alphabet_size
        self.delta = nfa.delta
        self.acc = nfa.accepting
        self.start = (nfa.initial,)
        self.empty = ()

    def key(self, states):
        return tuple(sorted({int(q) for q in states}))

    def expand(self, key):
        out = []
        delta = self.delta
        for a in range(self.m):
            nxt = set()
            for q in key:
                nxt.update(delta[q][a])
            out.append(tuple(sorted(nxt)))
        return out

    def accepting(self, key):
        return not self.acc.isdisjoint(key)

    def members(self, key):
        return key

    def size(self, key):
        return len(key)


def _kernel(nfa):
    if nfa.num_states <= _BITMASK_LIMIT:
        return _BitsetKernel(nfa)
    return _TupleKernel(nfa)


@dataclass
class SubsetRun:
    """Result of a subset construction run.

    ``subsets[i]`` is the sorted tuple of NFA states behind DFA state ``i``
    (for the multi-threaded tier, after canonical renumbering).
    ``profile`` lists newly discovered states per BFS level; it is empty for
    the depth-first tier.
    """

    dfa: Dfa
    profile: list = field(default_factory=list)
    subsets: list = field(default_factory=list)
    policy: str = "drop"
    peak_frontier: int = 0

    @property
    def subset_sizes(self):
        return [len(s) for s in self.subsets]


def subset_construction(nfa: Nfa, policy="drop", max_states=None, start=None) -> SubsetRun:
    """Sequential BFS subset construction with per-level duplicate detection.

    ``start`` overrides the initial subset (default ``{nfa.initial}``); it is
    how multi-initial automata such as reversed DFAs are determinized
    without an extra state.
    """
    policy = _check_policy(policy)
    kernel = _kernel(nfa)
    m = nfa.alphabet_size
    keep_empty = policy == "keep"
    empty = kernel.empty
    first = kernel.start if start is None else kernel.key(start)

    visited = {first: 0}
    keys = [first]
    rows = []
    profile = [1]
    frontier = [first]
    peak = 1
    while frontier:
        candidates = []
        for key in frontier:
            candidates.extend(kernel.expand(key))
        # Delayed duplicate detection: one batch per level, first appearance wins.
        fresh = [
            k for k in dict.fromkeys(candidates)
            if k not in visited and (keep_empty or k != empty)
        ]
        base = len(keys)
        if max_states is not None and base + len(fresh) > max_states:
            raise ResourceError(f"subset construction exceeded {max_states} states")
        for offset, k in enumerate(fresh):
            visited[k] = base + offset
        keys.extend(fresh)
        for j in range(len(frontier)):
            row = []
            for k in candidates[j * m:(j + 1) * m]:
                row.append(visited[k] if (keep_empty or k != empty) else UNDEFINED)
            rows.append(row)
        if fresh:
            profile.append(len(fresh))
        peak = max(peak, len(fresh))
        frontier = fresh

    n = len(keys)
    table = np.array(rows, dtype=np.int64).reshape(n, m)
    acc = np.fromiter((kernel.accepting(k) for k in keys), dtype=bool, count=n)
    dfa = Dfa(m, n, 0, acc, table)
    return SubsetRun(dfa, profile, [kernel.members(k) for k in keys], policy, peak)


def determinize(nfa: Nfa, policy="drop", max_states=None):
    """Return ``(dfa, frontier_profile)``.

    ``policy="drop"`` records the empty successor as an undefined
    transition; ``policy="keep"`` materializes it as a rejecting sink, so the
    output is complete.
    """
    run = subset_construction(nfa, policy, max_states)
    return run.dfa, run.profile


def _mt_run(nfa, policy, workers, partitions, max_states):
    policy = _check_policy(policy)
    if workers < 1:
        raise InputError("workers must be >= 1")
    if partitions < workers:
        raise InputError("partitions must be >= workers")
    kernel = _kernel(nfa)
    m = nfa.alphabet_size
    keep_empty = policy == "keep"
    empty = kernel.empty

    visited = PartitionedTable(partitions)
    counters = [0] * workers
    limit = 1 << _ID_BITS

    def new_id(w):
        c = counters[w]
        if c >= limit:
            raise ResourceError("provisional id space exhausted")
        counters[w] = c + 1
        return (w << _ID_BITS) | c

    start_id = new_id(0)
    visited.insert_or_get(kernel.start, start_id)

    pool = [(kernel.start, start_id)]
    cond = threading.Condition()
    state = {"pending": 1, "error": None, "total": 1}
    results = [dict() for _ in range(workers)]

    def worker(w):
        rows = results[w]
        while True:
            with cond:
                while not pool and state["pending"] and state["error"] is None:
                    cond.wait()
                if state["error"] is not None or not state["pending"]:
                    return
                key, sid = pool.pop()
            try:
                row = []
                fresh = []
                for nxt in kernel.expand(key):
                    if not keep_empty and nxt == empty:
                        row.append(UNDEFINED)
                        continue
                    nid, inserted = visited.insert_or_get(nxt, new_id(w))
                    if inserted:
                        fresh.append((nxt, nid))
                    row.append(nid)
                rows[sid] = (key, row)
            except BaseException as exc:  # surfaced to the caller after join
                with cond:
                    state["error"] = exc
                    cond.notify_all()
                return
            with cond:
                state["total"] += len(fresh)
                if max_states is not None and state["total"] > max_states:
                    state["error"] = ResourceError(f"subset construction exceeded {max_states} states")
                    cond.notify_all()
                    return
                # Depth-first: the newest states are popped first.
                pool.extend(reversed(fresh))
                state["pending"] += len(fresh) - 1
                cond.notify_all()

    threads = [threading.Thread(target=worker, args=(w,), daemon=True) for w in range(workers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if state["error"] is not None:
        raise state["error"]

    merged = {}
    for r in results:
        merged.update(r)
    ids = list(merged)
    dense = {sid: i for i, sid in enumerate(ids)}
    table = np.array(
        [[UNDEFINED if t == UNDEFINED else dense[t] for t in merged[sid][1]] for sid in ids],
        dtype=np.int64,
    ).reshape(len(ids), m)
    keys = [merged[sid][0] for sid in ids]
    acc = np.fromiter((kernel.accepting(k) for k in keys), dtype=bool, count=len(keys))
    raw = Dfa(m, len(ids), dense[start_id], acc, table)
    logger.debug("mt subset construction: %d states, %d contended lock acquisitions",
                 len(ids), visited.contended)
    return raw, keys, kernel, policy


def determinize_mt(nfa: Nfa, workers=4, partitions=None, policy="drop", max_states=None):
    """Multi-threaded subset construction.

    Returns ``(dfa, profile)`` like :func:`determinize`.  Exploration is
    unordered, so the profile is recovered afterwards from BFS depths in the
    result; it matches the sequential one.
    """
    if partitions is None:
        partitions = max(64, workers)
    raw, _, _, _ = _mt_run(nfa, policy, workers, partitions, max_states)
    dfa = canonical_renumber(raw)
    return dfa, level_profile(dfa)


def subset_construction_mt(nfa: Nfa, workers=4, partitions=None, policy="drop", max_states=None) -> SubsetRun:
    """Like :func:`determinize_mt` but keeps the subsets, in canonical order."""
    if partitions is None:
        partitions = max(64, workers)
    raw, keys, kernel, policy = _mt_run(nfa, policy, workers, partitions, max_states)
    dfa = canonical_renumber(raw)
    # canonical_renumber is a BFS; replay it to carry the subsets along.
    order = _bfs_order(raw)
    return SubsetRun(dfa, [], [kernel.members(keys[i]) for i in order], policy)


def _bfs_order(d: Dfa):
    seen = np.zeros(d.num_states, dtype=bool)
    seen[d.initial] = True
    order = [d.initial]
    i = 0
    while i < len(order):
        for t in d.table[order[i]].tolist():
            if t != UNDEFINED and not seen[t]:
                seen[t] = True
                order.append(t)
        i += 1
    return order


def level_profile(d: Dfa) -> list:
    """Number of states at each BFS depth from the initial state."""
    depth = np.full(d.num_states, -1, dtype=np.int64)
    depth[d.initial] = 0
    frontier = [d.initial]
    profile = []
    while frontier:
        profile.append(len(frontier))
        nxt = []
        for q in frontier:
            for t in d.table[q].tolist():
                if t != UNDEFINED and depth[t] < 0:
                    depth[t] = len(profile)
                    nxt.append(t)
        frontier = nxt
    return profile


def subset_stats(run: SubsetRun):
    """Return ``(average_subset_size, max_subset_size)``; the average is exact."""
    sizes = run.subset_sizes
    if not sizes:
        raise InputError("no subsets recorded")
    return Fraction(sum(sizes), len(sizes)), max(sizes)
