"""Out-of-core subset construction.

One superstep per BFS level:

1. expand: worker ``w`` streams its partition of the frontier, expands each
   subset by every label and routes the candidate ``(provisional id,
   subset)`` to the partition its subset hashes to, through a BatchBuffer;
2. dedup: each owner sorts its inbound candidates by subset, merges them
   against its sorted visited run, resolves duplicates to one survivor and
   emits the transitions whose targets were already known;
3. assign: the coordinator merges the owners' survivors in provisional-id
   order and hands out dense ids;
4. finish: owners write the new frontier and accepting ids, fold the new
   states into visited and repair the remaining transitions by a join.

The provisional id of a candidate is ``source_id * m + label``.  It needs
no coordination and is also the position at which a breadth-first search
would first meet the subset, so handing out ids in provisional order gives
the BFS-canonical numbering directly.

A manifest is written after every level; ``resume=True`` continues from it.
"""

from __future__ import annotations

import errno
import hashlib
import heapq
import logging
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from itertools import groupby
from pathlib import Path

from .._errors import InputError, IntegrityError, ResourceError
from ..core import Nfa
from ..determinize import _check_policy, _kernel
from ..io import SENTINEL, dumps_text
from ..io import _HEAD as PACKED_HEAD
from ..io import MAGIC as PACKED_MAGIC
from ..io import VERSION as PACKED_VERSION
from .checkpoint import Checkpoint, fresh_dir
from .config import OocConfig
from .ondisk import DfaOnDisk
from .records import BLOCK, PAIR, SUBSET, TRIPLE, U64, decode_members, encode_members
from .report import RunReport
from .storage import BatchBuffer, RunContext, Stopwatch, external_sort, partition_of

logger = logging.getLogger(__name__)

OUTPUT = "dfa.fsad"


def _fingerprint(nfa, policy, workers):
    h = hashlib.blake2b(digest_size=16)
    h.update(dumps_text(nfa).encode())
    h.update(f"|{policy}|{workers}".encode())
    return h.hexdigest()


def _by_blob(rec):
    return rec[2]


def _by_blob_then_id(rec):
    return rec[2], rec[0]


def _first(rec):
    return rec[0]


class _Determinization:
    def __init__(self, nfa, cfg, policy, max_states, root, on_superstep):
        self.nfa = nfa
        self.cfg = cfg
        self.W = cfg.workers
        self.B = cfg.buffer_bytes
        self.m = nfa.alphabet_size
        self.policy = policy
        self.keep_empty = policy == "keep"
        self.max_states = max_states
        self.root = Path(root)
        self.hook = on_superstep
        self.kernel = _kernel(nfa)
        self.acc = frozenset(nfa.accepting)
        self.ctx = RunContext(self.root, cfg.disk_limit)
        self.ckpt = Checkpoint(self.root, cfg.checkpoint)
        self.fingerprint = _fingerprint(nfa, policy, self.W)
        self.sort_budget = self.B - 3 * BLOCK

    # -- state -----------------------------------------------------------

    def _p(self, rel):
        return self.root / rel

    def _rel(self, path):
        return os.path.relpath(path, self.root)

    def _listed(self):
        s = self.state
        files = list(s["visited"]) + list(s["frontier"])
        for group in s["triples"] + s["accepting"]:
            files += group
        return [self._p(f) for f in files]

    def _commit(self, step, stale=()):
        self.state["report"] = self.report.to_dict()
        self.ckpt.save(self.state, self._listed())
        self.ctx.remove(*stale)
        if self.hook is not None:
            self.hook(step)

    def _dirs(self):
        for d in ("visited", "frontier", "triples", "accept"):
            (self.root / d).mkdir(exist_ok=True)

    def _fresh(self):
        fresh_dir(self.root)
        self._dirs()
        self.report = RunReport("determinize", self.W, self.B, self.cfg.memory_bound)
        self.state = {
            "fingerprint": self.fingerprint,
            "level": 0,
            "next_id": 1,
            "frontier_size": 1,
            "profile": [1],
            "visited": [],
            "frontier": [],
            "triples": [],
            "accepting": [],
            "done": False,
        }
        clock = Stopwatch()
        members = self.kernel.members(self.kernel.start)
        blob = encode_members(members)
        home = partition_of(blob, self.W)
        rec = (0, len(members), blob)
        accepting = []
        for k in range(self.W):
            mine = [rec] if k == home else []
            v = self.root / "visited" / f"v{k}.g0"
            f = self.root / "frontier" / f"f{k}.l0"
            a = self.root / "accept" / f"a{k}.l0"
            self.ctx.write_all(v, SUBSET, mine, "init")
            self.ctx.write_all(f, SUBSET, mine, "init")
            self.ctx.write_all(a, U64, [0] if mine and self._accepting(members) else [], "init")
            self.state["visited"].append(self._rel(v))
            self.state["frontier"].append(self._rel(f))
            accepting.append(self._rel(a))
        self.state["accepting"].append(accepting)
        self._close_step(0, clock, 1)
        self._commit(0)

    def _resume(self):
        state = self.ckpt.load(verify=True)
        if state.get("fingerprint") != self.fingerprint:
            raise InputError(f"{self.root}: checkpoint belongs to a different input or configuration")
        self.ckpt.prune(keep=[self.root / OUTPUT])
        self._dirs()
        state.pop("_files")
        self.state = state
        self.report = RunReport.from_dict(state["report"])
        self.report.resumed += 1
        for f in self._listed():
            self.ctx.disk.adopt(f)
        logger.info("resuming determinization at level %d", state["level"])

    def _close_step(self, step, clock, new_states):
        before_w = sum(self.ctx.disk.written.values())
        before_r = sum(self.ctx.disk.read.values())
        self.report.absorb(self.ctx)
        self.report.supersteps.append({
            "step": step,
            "wall_seconds": clock.elapsed(),
            "new_states": new_states,
            "visited_bytes": sum(os.path.getsize(f) for f in map(self._p, self.state["visited"])),
            "bytes_written": before_w,
            "bytes_read": before_r,
        })

    def _accepting(self, members):
        return not self.acc.isdisjoint(members)

    # -- phases ----------------------------------------------------------

    def _expand(self, w, scratch):
        m = self.m
        kernel = self.kernel
        empty = kernel.empty
        keep = self.keep_empty
        W = self.W
        buf = BatchBuffer(
            self.ctx, W, (self.B - 3 * BLOCK) // W, SUBSET,
            lambda d, i: scratch / f"c{w}-{d}-{i}", "expand",
        )
        for cid, count, blob in self.ctx.read(self._p(self.state["frontier"][w]), SUBSET, "expand"):
            key = kernel.key(decode_members(count, blob))
            base = cid * m
            for a, nxt in enumerate(kernel.expand(key)):
                if nxt == empty and not keep:
                    continue
                members = kernel.members(nxt)
                b = encode_members(members)
                buf.append(partition_of(b, W), (base + a, len(members), b))
        return buf.close()

    def _dedup(self, k, inbound, scratch):
        ctx, m = self.ctx, self.m
        cand = scratch / f"s{k}"
        external_sort(ctx, inbound, cand, SUBSET, _by_blob_then_id, self.sort_budget, "dedup")
        known = scratch / f"known{k}"
        new = scratch / f"new{k}"
        links = scratch / f"links{k}"
        visited = ctx.read(self._p(self.state["visited"][k]), SUBSET, "dedup")
        v = next(visited, None)
        with ctx.writer(known, TRIPLE, "dedup") as wk, \
                ctx.writer(new, SUBSET, "dedup") as wn, \
                ctx.writer(links, PAIR, "dedup") as wl:
            for blob, group in groupby(ctx.read(cand, SUBSET, "dedup"), key=_by_blob):
                while v is not None and v[2] < blob:
                    v = next(visited, None)
                if v is not None and v[2] == blob:
                    cid = v[0]
                    for prov, _, _ in group:
                        wk.write((prov // m, prov % m, cid))
                    continue
                first = next(group)
                survivor = first[0]
                wn.write((survivor, first[1], blob))
                wl.write((survivor, survivor))
                for prov, _, _ in group:
                    wl.write((prov, survivor))
        for _ in visited:  # finish the stream so its checksum is checked
            pass
        ctx.remove(cand)
        count = external_sort(ctx, [new], scratch / f"newp{k}", SUBSET, _first,
                              self.sort_budget, "dedup")
        return count

    def _assign(self, scratch):
        ctx = self.ctx
        base = self.state["next_id"]

        def tagged(k):
            for rec in ctx.read(scratch / f"newp{k}", SUBSET, "assign"):
                yield rec[0], k

        writers = [ctx.writer(scratch / f"ids{k}", PAIR, "assign") for k in range(self.W)]
        n = 0
        try:
            for prov, k in heapq.merge(*(tagged(k) for k in range(self.W))):
                writers[k].write((prov, base + n))
                n += 1
                if self.max_states is not None and base + n > self.max_states:
                    raise ResourceError(f"subset construction exceeded {self.max_states} states")
        except BaseException:
            for w in writers:
                w.abort()
            raise
        for w in writers:
            w.close()
        return n

    def _finish(self, k, level, scratch):
        ctx, m = self.ctx, self.m
        ids = scratch / f"ids{k}"
        newp = scratch / f"newp{k}"
        frontier = self.root / "frontier" / f"f{k}.l{level}"
        accept = self.root / "accept" / f"a{k}.l{level}"
        with ctx.writer(frontier, SUBSET, "finish") as wf, ctx.writer(accept, U64, "finish") as wa:
            for rec, (prov, cid) in zip(ctx.read(newp, SUBSET, "finish"), ctx.read(ids, PAIR, "finish")):
                if rec[0] != prov:
                    raise IntegrityError(f"{ids}: id map out of step with new states")
                wf.write((cid, rec[1], rec[2]))
                if self._accepting(decode_members(rec[1], rec[2])):
                    wa.write(cid)
        ctx.remove(newp)

        external_sort(ctx, [frontier], scratch / f"vs{k}", SUBSET, _by_blob,
                              self.sort_budget, "finish", remove_inputs=False)
        visited = self.root / "visited" / f"v{k}.g{level}"
        old = self._p(self.state["visited"][k])
        ctx.write_all(visited, SUBSET, heapq.merge(
            ctx.read(old, SUBSET, "finish"), ctx.read(scratch / f"vs{k}", SUBSET, "finish"),
            key=_by_blob), "finish")
        ctx.remove(scratch / f"vs{k}")

        # Repair: links (prov -> survivor) joined with ids (survivor -> id).
        external_sort(ctx, [scratch / f"links{k}"], scratch / f"ls{k}", PAIR,
                              lambda r: (r[1], r[0]), self.sort_budget, "finish")
        repaired = scratch / f"repaired{k}"
        with ctx.writer(repaired, TRIPLE, "finish") as wr:
            id_stream = ctx.read(ids, PAIR, "finish")
            cur = next(id_stream, None)
            for prov, survivor in ctx.read(scratch / f"ls{k}", PAIR, "finish"):
                while cur is not None and cur[0] < survivor:
                    cur = next(id_stream, None)
                if cur is None or cur[0] != survivor:
                    raise IntegrityError(f"survivor {survivor} has no assigned id")
                wr.write((prov // m, prov % m, cur[1]))
            for _ in id_stream:
                pass
        ctx.remove(scratch / f"ls{k}", ids)
        triples = self.root / "triples" / f"t{k}.l{level}"
        external_sort(ctx, [scratch / f"known{k}", repaired], triples, TRIPLE,
                      lambda r: (r[0], r[1]), self.sort_budget, "finish")
        return self._rel(frontier), self._rel(accept), self._rel(visited), self._rel(triples)

    # -- driver ----------------------------------------------------------

    def run(self, resume):
        if resume and self.ckpt.exists():
            self._resume()
        else:
            if resume and not self.cfg.checkpoint:
                raise InputError("resume needs checkpointing enabled")
            self._fresh()
        with ThreadPoolExecutor(max_workers=self.W) as pool:
            while not self.state["done"] and self.state["frontier_size"]:
                self._level(pool)
        if not self.state["done"]:
            self._write_output()
        out = self.root / OUTPUT
        self.report.num_states = self.state["next_id"]
        self.report.profile = list(self.state["profile"])
        self.report.complete = True
        return DfaOnDisk(out, self.report)

    def _level(self, pool):
        level = self.state["level"] + 1
        clock = Stopwatch()
        scratch = self.root / f"l{level}"
        scratch.mkdir(exist_ok=True)
        W = self.W

        routed = list(pool.map(lambda w: self._expand(w, scratch), range(W)))
        inbound = [[p for w in range(W) for p in routed[w][k]] for k in range(W)]
        list(pool.map(lambda k: self._dedup(k, inbound[k], scratch), range(W)))
        new = self._assign(scratch)
        outs = list(pool.map(lambda k: self._finish(k, level, scratch), range(W)))
        scratch.rmdir()

        s = self.state
        stale = [self._p(f) for f in s["visited"] + s["frontier"]]
        s["frontier"] = [o[0] for o in outs]
        s["accepting"].append([o[1] for o in outs])
        s["visited"] = [o[2] for o in outs]
        s["triples"].append([o[3] for o in outs])
        s["level"] = level
        s["next_id"] += new
        s["frontier_size"] = new
        if new:
            s["profile"].append(new)
        logger.debug("level %d: %d new states", level, new)
        self._close_step(level, clock, new)
        self._commit(level, stale)

    def _write_output(self):
        ctx = self.ctx
        s = self.state
        n, m = s["next_id"], self.m
        if n * m >= 1 << 63:
            raise ResourceError("DFA too large for the packed format")
        out = self.root / OUTPUT
        tmp = self.root / (OUTPUT + ".tmp")
        sentinel = SENTINEL.to_bytes(8, "little")
        clock = Stopwatch()
        with open(tmp, "wb") as fh:
            def emit(data):
                ctx.disk.charge(len(data), "output")
                fh.write(data)

            emit(PACKED_HEAD.pack(PACKED_MAGIC, PACKED_VERSION, m, n, 0))
            acc_ids = heapq.merge(*(ctx.read(self._p(f), U64, "output")
                                    for group in s["accepting"] for f in group))
            bits = bytearray((n + 7) // 8)  # n/8 bytes: small next to the table
            for q in acc_ids:
                bits[q >> 3] |= 1 << (q & 7)
            emit(bytes(bits))
            pos = 0
            buf = bytearray()
            for group in s["triples"]:
                for q, a, t in heapq.merge(*(ctx.read(self._p(f), TRIPLE, "output") for f in group)):
                    cell = q * m + a
                    if cell < pos:
                        raise IntegrityError("duplicate transition in triple log")
                    buf += sentinel * (cell - pos)
                    buf += t.to_bytes(8, "little")
                    pos = cell + 1
                    if len(buf) >= BLOCK:
                        emit(bytes(buf))
                        buf.clear()
            buf += sentinel * (n * m - pos)
            emit(bytes(buf))
        ctx.disk.settle(tmp, os.path.getsize(tmp))
        os.replace(tmp, out)
        ctx.disk.settle(out, ctx.disk.sizes.pop(os.fspath(tmp)))
        stale = self._listed()
        s["done"] = True
        for key in ("visited", "frontier", "triples", "accepting"):
            s[key] = []
        self._close_step("output", clock, 0)
        self.report.num_states = n
        self.report.profile = list(s["profile"])
        self.report.complete = True
        self.state["report"] = self.report.to_dict()
        self.ckpt.save(self.state, [])
        ctx.remove(*stale)


def ooc_determinize(nfa: Nfa, cfg: OocConfig | None = None, policy="drop", max_states=None,
                    workdir=None, resume=False, on_superstep=None) -> DfaOnDisk:
    """File-backed subset construction; returns the packed DFA on disk.

    The output is BFS-canonical, byte-identical to packing
    ``determinize(nfa, policy)[0]``.  ``workdir`` holds spill files, the
    manifest and ``dfa.fsad``; it defaults to a fresh directory under
    ``cfg.tmpdir``.  ``on_superstep(step)`` runs after each level's manifest
    is saved; raising from it simulates a crash.

    Raises :class:`ResourceError` when the disk fills (its ``manifest``
    names the last checkpoint) and :class:`IntegrityError` on a corrupted
    spill file.
    """
    if not isinstance(nfa, Nfa):
        raise InputError("ooc_determinize needs an Nfa")
    cfg = cfg or OocConfig()
    policy = _check_policy(policy)
    if workdir is None:
        workdir = tempfile.mkdtemp(prefix="ooc-det-", dir=cfg.tmpdir)
    run = _Determinization(nfa, cfg, policy, max_states, workdir, on_superstep)
    try:
        return run.run(resume)
    except OSError as exc:
        if exc.errno == errno.ENOSPC:
            manifest = str(run.ckpt.path) if run.ckpt.exists() else None
            raise ResourceError(f"disk full in {workdir}", manifest=manifest) from exc
        raise
