"""DFA minimization.

:func:`minimize_forward` is the forward-refinement algorithm: start from
the accepting / non-accepting split and, for every label in turn, re-split
states by the pair (own partition, successor's partition) until a whole
sweep over the alphabet leaves the partition count unchanged.  The stable
partitions are then collapsed into states.

:func:`minimize_forward_mt` runs the same sweeps with the states striped
over threads and the pair table partitioned by hash.  Hopcroft's and
Brzozowski's algorithms are provided as independent oracles.

All minimizers return the minimal *complete* DFA, canonically renumbered,
so their outputs can be compared with ``==``.  Pass ``trim=True`` to drop
the rejecting sink and get the minimal partial DFA instead.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._errors import InputError, InvariantError
from ._striped import PartitionedTable
from .core import UNDEFINED, Dfa, Nfa, canonical_renumber, dfa_complete, dfa_trim
from .determinize import subset_construction

logger = logging.getLogger(__name__)

__all__ = [
    "RefinementState",
    "initial_refinement",
    "refine_sweep",
    "forward_refinement",
    "collapse_partitions",
    "minimize_forward",
    "minimize_forward_mt",
    "minimize_hopcroft",
    "minimize_brzozowski",
    "MINIMIZERS",
]


@dataclass
class RefinementState:
    """Partition ids per state plus the loop counters of forward refinement.

    ``counts`` records the partition count after every completed sweep.
    """

    curr_refs: np.ndarray
    next_refs: np.ndarray
    prev_num_refs: int
    curr_num_refs: int
    label: int = 0
    counts: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.prev_num_refs >= self.curr_num_refs

    @property
    def sweeps(self) -> int:
        return len(self.counts)


def initial_refinement(dfa: Dfa) -> RefinementState:
    curr = dfa.accepting_mask.astype(np.int64)
    return RefinementState(curr, np.zeros_like(curr), 0, 2)


def _split(first, second):
    """Dense ids for the pairs ``(first[i], second[i])`` in first-encounter order."""
    width = int(second.max()) + 2 if second.size else 1
    key = first * width + (second + 1)
    _, where, inverse = np.unique(key, return_index=True, return_inverse=True)
    rank = np.empty(where.size, dtype=np.int64)
    rank[np.argsort(where, kind="stable")] = np.arange(where.size)
    return rank[inverse.reshape(-1)], int(where.size)


def _successor_parts(dfa, curr, label):
    succ = dfa.table[:, label]
    # Undefined successors map to a value no partition uses.
    return np.where(succ == UNDEFINED, -1, curr[np.maximum(succ, 0)])


def refine_sweep(dfa: Dfa, rs: RefinementState) -> RefinementState:
    """One outer iteration: split by every label in increasing order."""
    curr = rs.curr_refs
    nxt = rs.next_refs
    count = rs.curr_num_refs
    for label in range(dfa.alphabet_size):
        nxt, count = _split(curr, _successor_parts(dfa, curr, label))
        curr = nxt
    if dfa.alphabet_size == 0:
        count = int(np.unique(curr).size)
    return RefinementState(
        curr, nxt, rs.curr_num_refs, count, dfa.alphabet_size - 1, rs.counts + [count]
    )


def _prepare(dfa: Dfa) -> Dfa:
    return dfa_complete(canonical_renumber(dfa))


def _single_state(dfa: Dfa, accepting: bool) -> Dfa:
    m = dfa.alphabet_size
    return Dfa(m, 1, 0, [0] if accepting else [], np.zeros((1, m), dtype=np.int64))


def _uniform(dfa: Dfa):
    acc = dfa.accepting_mask
    if acc.all():
        return True
    if not acc.any():
        return False
    return None


def _finish(result: Dfa, trim: bool) -> Dfa:
    return dfa_trim(result) if trim else result


def forward_refinement(dfa: Dfa, max_sweeps=None) -> RefinementState:
    """Run sweeps until the partition count stops growing.

    ``dfa`` should be complete and reachable (see :func:`minimize_forward`).
    """
    rs = initial_refinement(dfa)
    while rs.prev_num_refs < rs.curr_num_refs:
        rs = refine_sweep(dfa, rs)
        logger.debug("sweep %d: %d partitions", rs.sweeps, rs.curr_num_refs)
        if max_sweeps is not None and rs.sweeps >= max_sweeps:
            break
    return rs


def collapse_partitions(dfa: Dfa, refs) -> Dfa:
    """Merge each partition into one state.

    Raises :class:`InvariantError` when two members of a partition disagree
    on a successor partition, which means ``refs`` has not converged.
    """
    refs = np.asarray(refs, dtype=np.int64)
    if refs.shape != (dfa.num_states,):
        raise InputError("refs must assign a partition to every state")
    ids, dense = np.unique(refs, return_inverse=True)
    dense = dense.reshape(-1)
    k = ids.size
    _, rep = np.unique(dense, return_index=True)
    table = dfa.table
    mapped = np.where(table == UNDEFINED, UNDEFINED, dense[np.maximum(table, 0)])
    rows = mapped[rep]
    bad = np.any(rows[dense] != mapped, axis=1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise InvariantError(
            f"partition {int(refs[i])} is not stable: state {i} disagrees with state {int(rep[dense[i]])}"
        )
    acc = np.zeros(k, dtype=bool)
    np.logical_or.at(acc, dense, dfa.accepting_mask)
    return canonical_renumber(Dfa(dfa.alphabet_size, k, int(dense[dfa.initial]), acc, rows))


def minimize_forward(dfa: Dfa, return_sweeps=False, trim=False):
    """Minimal complete DFA by forward refinement.

    With ``return_sweeps=True`` returns ``(dfa, sweeps)`` where ``sweeps`` is
    the number of outer refinement iterations (0 when the input has a single
    acceptance class).
    """
    d = _prepare(dfa)
    uniform = _uniform(d)
    if uniform is not None:
        out, sweeps = _single_state(d, uniform), 0
    else:
        rs = forward_refinement(d)
        out, sweeps = collapse_partitions(d, rs.curr_refs), rs.sweeps
        logger.info("forward refinement: %d -> %d states in %d sweeps",
                    dfa.num_states, out.num_states, sweeps)
    out = _finish(out, trim)
    return (out, sweeps) if return_sweeps else out


def _mt_sweeps(d: Dfa, workers: int, partitions: int):
    n, m = d.num_states, d.alphabet_size
    stripes = [s for s in np.array_split(np.arange(n), workers) if s.size]
    curr = d.accepting_mask.astype(np.int64)
    prev_num, curr_num = 0, 2
    counts = []
    table = d.table
    with ThreadPoolExecutor(max_workers=workers) as pool:
        while prev_num < curr_num:
            prev_num = curr_num
            for label in range(m):
                parts = PartitionedTable(partitions)
                succ = table[:, label]

                def pairs(idx):
                    return curr[idx], curr[succ[idx]]

                def resolve(job):
                    idx, (first, second) = job
                    # Combine equal pairs locally; the representative state id
                    # is the provisional partition id sent to the table.
                    key = first * (n + 1) + second
                    _, where, inverse = np.unique(key, return_index=True, return_inverse=True)
                    won = np.empty(where.size, dtype=np.int64)
                    for j, w in enumerate(where.tolist()):
                        won[j], _ = parts.get_or_insert_optimistic(
                            (int(first[w]), int(second[w])), int(idx[w])
                        )
                    return idx, won[inverse.reshape(-1)]

                computed = list(pool.map(pairs, stripes))
                resolved = list(pool.map(resolve, zip(stripes, computed)))
                nxt = np.empty(n, dtype=np.int64)
                for idx, ids in resolved:
                    nxt[idx] = ids
                _, nxt = np.unique(nxt, return_inverse=True)
                curr = nxt.reshape(-1).astype(np.int64)
            curr_num = int(curr.max()) + 1
            counts.append(curr_num)
    return curr, counts


def minimize_forward_mt(dfa: Dfa, workers=4, partitions=None, return_sweeps=False, trim=False):
    """Forward refinement with states striped across ``workers`` threads.

    Each label step runs three barrier-separated phases: pair computation,
    pair resolution through a partitioned table (first insert wins, losers
    adopt the winner's id) and write-back with dense compaction.
    """
    if workers < 1:
        raise InputError("workers must be >= 1")
    if partitions is None:
        partitions = max(64, workers)
    d = _prepare(dfa)
    uniform = _uniform(d)
    if uniform is not None:
        out, sweeps = _single_state(d, uniform), 0
    else:
        refs, counts = _mt_sweeps(d, workers, partitions)
        out, sweeps = collapse_partitions(d, refs), len(counts)
    out = _finish(out, trim)
    return (out, sweeps) if return_sweeps else out


def minimize_hopcroft(dfa: Dfa, trim=False) -> Dfa:
    """Hopcroft's partition refinement with a (block, label) worklist."""
    d = _prepare(dfa)
    n, m = d.num_states, d.alphabet_size
    uniform = _uniform(d)
    if uniform is not None:
        return _finish(_single_state(d, uniform), trim)

    preds = [defaultdict(list) for _ in range(m)]
    for q, a, r in d.transitions():
        preds[a][r].append(q)

    acc = d.accepting_mask
    blocks = [set(np.flatnonzero(acc).tolist()), set(np.flatnonzero(~acc).tolist())]
    block_of = [0 if acc[q] else 1 for q in range(n)]
    smaller = 0 if len(blocks[0]) <= len(blocks[1]) else 1
    work = {(smaller, a) for a in range(m)}
    while work:
        b, a = work.pop()
        pa = preds[a]
        touched = defaultdict(set)
        for q in blocks[b]:
            for p in pa.get(q, ()):
                touched[block_of[p]].add(p)
        for y, inter in touched.items():
            if len(inter) == len(blocks[y]):
                continue
            new = len(blocks)
            blocks.append(inter)
            blocks[y] -= inter
            for p in inter:
                block_of[p] = new
            for c in range(m):
                if (y, c) in work:
                    work.add((new, c))
                elif len(inter) <= len(blocks[y]):
                    work.add((new, c))
                else:
                    work.add((y, c))
    return _finish(collapse_partitions(d, np.array(block_of)), trim)


def _reversed_edges(nfa: Nfa) -> Nfa:
    return Nfa(nfa.alphabet_size, nfa.num_states, nfa.initial, [nfa.initial],
               ((r, a, q) for q, a, r in nfa.transitions()))


def minimize_brzozowski(automaton, trim=False, max_states=None) -> Dfa:
    """Determinize the reversal twice.

    Reversals are determinized from the set of former accepting states
    directly, which keeps the second determinization minimal.  Accepts an
    :class:`Nfa` or a :class:`Dfa`.
    """
    nfa = automaton.to_nfa() if isinstance(automaton, Dfa) else automaton
    back = _reversed_edges(nfa)
    first = subset_construction(back, "drop", max_states, start=nfa.accepting).dfa
    first_nfa = first.to_nfa()
    again = _reversed_edges(first_nfa)
    second = subset_construction(again, "keep", max_states, start=first_nfa.accepting).dfa
    return _finish(canonical_renumber(second), trim)


MINIMIZERS = {
    "forward": minimize_forward,
    "hopcroft": minimize_hopcroft,
    "brzozowski": minimize_brzozowski,
}
