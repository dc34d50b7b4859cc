"""Out-of-core forward refinement.

States are split into ``W`` contiguous id ranges ("chunks"); worker ``k``
keeps the partition ids of chunk ``k`` in memory and streams its rows of
the packed table from disk.  Each label step is a scatter-gather exchange:

A. request: for every own state ``i`` with successor ``t``, send ``(t, i)``
   to the owner of ``t``;
B. respond: owners answer ``(i, refs[t])``;
C. pair: each worker forms ``(refs[i], refs[t])`` and routes it, tagged with
   ``i``, to the pair table partition its hash selects;
D. resolve: each partition numbers its distinct pairs in arrival order
   (first insert wins) and answers ``(i, local id)``;
E. write back: global ids are ``offset[partition] + local id``.

A sweep applies every label once; sweeps repeat while the partition count
grows.  Collapse reuses steps A-C to learn each class's successor classes.
"""

from __future__ import annotations

import errno
import hashlib
import logging
import os
import struct
import tempfile
import zlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .._errors import InputError, IntegrityError, InvariantError, ResourceError
from ..core import Dfa, canonical_renumber, dfa_trim
from ..io import SENTINEL, PackedHeader, dumps_packed, read_packed_header
from .checkpoint import Checkpoint, fresh_dir
from .config import OocConfig
from .ondisk import DfaOnDisk
from .records import BLOCK, PAIR, TRIPLE64, U64
from .report import RunReport
from .storage import BatchBuffer, MemoryMeter, RunContext, Stopwatch

logger = logging.getLogger(__name__)

WORKING = "work.fsad"
_PAIR_KEY = struct.Struct("<QQ")


def _file_digest(path):
    h = hashlib.blake2b(digest_size=16)
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class _Minimization:
    def __init__(self, source, cfg, root, hook):
        self.source = Path(source)
        self.cfg = cfg
        self.W = cfg.workers
        self.B = cfg.buffer_bytes
        self.root = Path(root)
        self.hook = hook
        self.ctx = RunContext(self.root, cfg.disk_limit)
        self.working = MemoryMeter()
        self.ckpt = Checkpoint(self.root, cfg.checkpoint)
        self.threshold = (self.B - 3 * BLOCK) // self.W

    # -- setup -----------------------------------------------------------

    def _bounds(self):
        n, W = self.n, self.W
        return [k * n // W for k in range(W + 1)]

    def _owner(self, t):
        # Chunk k holds ids [bounds[k], bounds[k+1]).
        return int(np.searchsorted(self.bounds, t, side="right")) - 1

    def _prepare(self):
        """Copy the input to the work directory, completing it if partial."""
        h = read_packed_header(self.source)
        m, n = h.m, h.n
        partial = False
        with open(self.source, "rb") as fh:
            fh.seek(h.table_offset)
            for block in iter(lambda: fh.read(BLOCK * 8), b""):
                if SENTINEL in np.frombuffer(block, dtype="<u8"):
                    partial = True
                    break
        out = self.root / WORKING
        if not partial:
            with open(self.source, "rb") as src, open(out, "wb") as dst:
                for block in iter(lambda: src.read(BLOCK), b""):
                    self.ctx.disk.charge(len(block), "prepare")
                    dst.write(block)
        else:
            sink = n
            with open(self.source, "rb") as src, open(out, "wb") as dst:
                def emit(data):
                    self.ctx.disk.charge(len(data), "prepare")
                    dst.write(data)
                head = PackedHeader(m, n + 1, h.initial)
                src.seek(0)
                raw_head = bytearray(src.read(h.bits_offset))
                struct.pack_into("<Q", raw_head, 13, n + 1)
                emit(bytes(raw_head))
                bits = bytearray(src.read(h.bits_size))
                if len(bits) < head.bits_size:
                    bits.append(0)
                emit(bytes(bits))
                src.seek(h.table_offset)
                for block in iter(lambda: src.read(BLOCK), b""):
                    arr = np.frombuffer(block, dtype="<u8").copy()
                    arr[arr == SENTINEL] = sink
                    emit(arr.tobytes())
                emit(np.full(m, sink, dtype="<u8").tobytes())
        self.ctx.disk.settle(out, os.path.getsize(out))

    def _load_header(self):
        self.head = read_packed_header(self.root / WORKING)
        self.n, self.m = self.head.n, self.head.m
        self.bounds = self._bounds()

    def _accepting_chunk(self, k):
        lo, hi = self.bounds[k], self.bounds[k + 1]
        with open(self.root / WORKING, "rb") as fh:
            fh.seek(self.head.bits_offset + lo // 8)
            raw = fh.read((hi + 7) // 8 - lo // 8)
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")
        start = lo - (lo // 8) * 8
        return bits[start:start + hi - lo].astype(np.int64)

    def _column(self, k, label):
        """Yield ``(first_state, successors)`` blocks of chunk ``k`` for ``label``."""
        lo, hi = self.bounds[k], self.bounds[k + 1]
        m = self.m
        rows = max(1, BLOCK // (8 * m))
        with self.ctx.memory.hold(rows * m * 8), open(self.root / WORKING, "rb") as fh:
            for r0 in range(lo, hi, rows):
                r1 = min(hi, r0 + rows)
                fh.seek(self.head.table_offset + r0 * m * 8)
                data = fh.read((r1 - r0) * m * 8)
                self.ctx.disk.note_read(len(data), "pairs")
                table = np.frombuffer(data, dtype="<u8").reshape(r1 - r0, m)
                yield r0, table[:, label].astype(np.int64)

    # -- state -----------------------------------------------------------

    def _fresh(self):
        fresh_dir(self.root)
        (self.root / "refs").mkdir()
        self._prepare()
        self._load_header()
        self.report = RunReport("minimize", self.W, self.B, self.cfg.memory_bound)
        self.refs = [self._accepting_chunk(k) for k in range(self.W)]
        for r in self.refs:
            self.working.acquire(r.nbytes)
        acc_total = int(sum(int(r.sum()) for r in self.refs))
        self.state = {
            "fingerprint": self._fingerprint(),
            "work_digest": _file_digest(self.root / WORKING),
            "sweep": 0,
            "prev": 0,
            "curr": 2,
            "counts": [],
            "uniform": None if 0 < acc_total < self.n else bool(acc_total),
            "refs": [],
            "done": False,
        }
        clock = Stopwatch()
        self._save_refs(0)
        self._close_step(0, clock)
        self._commit(0, [])

    def _fingerprint(self):
        return f"{_file_digest(self.source)}|{self.W}"

    def _resume(self):
        state = self.ckpt.load(verify=True)
        if state.get("fingerprint") != self._fingerprint():
            raise InputError(f"{self.root}: checkpoint belongs to a different input or configuration")
        if _file_digest(self.root / WORKING) != state["work_digest"]:
            raise IntegrityError(f"{self.root / WORKING}: checksum differs from manifest")
        self.ckpt.prune(keep=[self.root / WORKING])
        (self.root / "refs").mkdir(exist_ok=True)
        state.pop("_files")
        self.state = state
        self._load_header()
        self.report = RunReport.from_dict(state["report"])
        self.report.resumed += 1
        self.ctx.disk.adopt(self.root / WORKING)
        self.refs = []
        for rel in state["refs"]:
            self.ctx.disk.adopt(self.root / rel)
            arr = np.fromiter(self.ctx.read(self.root / rel, U64, "resume"), dtype=np.int64)
            self.working.acquire(arr.nbytes)
            self.refs.append(arr)
        logger.info("resuming refinement after sweep %d", state["sweep"])

    def _save_refs(self, sweep):
        stale = [self.root / rel for rel in self.state["refs"]]
        names = []
        for k, arr in enumerate(self.refs):
            path = self.root / "refs" / f"r{k}.s{sweep}"
            self.ctx.write_all(path, U64, arr.tolist(), "checkpoint")
            names.append(os.path.relpath(path, self.root))
        self.state["refs"] = names
        return stale

    def _commit(self, step, stale):
        self.state["report"] = self.report.to_dict()
        self.ckpt.save(self.state, [self.root / rel for rel in self.state["refs"]])
        self.ctx.remove(*stale)
        if self.hook is not None:
            self.hook(step)

    def _close_step(self, step, clock, **extra):
        written = sum(self.ctx.disk.written.values())
        read = sum(self.ctx.disk.read.values())
        self.report.absorb(self.ctx)
        self.report.peak_working_set_bytes = max(self.report.peak_working_set_bytes,
                                                 self.working.peak)
        self.report.supersteps.append({
            "step": step, "wall_seconds": clock.elapsed(),
            "bytes_written": written, "bytes_read": read, **extra,
        })

    # -- exchange rounds -------------------------------------------------

    def _buffer(self, name, codec, phase):
        return BatchBuffer(self.ctx, self.W, self.threshold, codec,
                           lambda d, i: self.scratch / f"{name}-{d}-{i}", phase)

    def _gather(self, pool, label, tag):
        """Steps A and B: per chunk, the partition ids of each state's successor."""
        W = self.W

        def request(k):
            buf = self._buffer(f"{tag}q{k}", PAIR, "gather")
            for r0, succ in self._column(k, label):
                for off, t in enumerate(succ.tolist()):
                    buf.append(self._owner(t), (t, r0 + off))
            return buf.close()

        asked = list(pool.map(request, range(W)))

        def respond(j):
            lo = self.bounds[j]
            refs = self.refs[j]
            buf = self._buffer(f"{tag}a{j}", PAIR, "gather")
            for k in range(W):
                for path in asked[k][j]:
                    for t, i in self.ctx.read(path, PAIR, "gather"):
                        buf.append(self._owner(i), (i, int(refs[t - lo])))
                    self.ctx.remove(path)
            return buf.close()

        answered = list(pool.map(respond, range(W)))

        def collect(k):
            lo, hi = self.bounds[k], self.bounds[k + 1]
            second = np.full(hi - lo, -1, dtype=np.int64)
            self.working.acquire(second.nbytes)
            for j in range(W):
                for path in answered[j][k]:
                    for i, r in self.ctx.read(path, PAIR, "gather"):
                        second[i - lo] = r
                    self.ctx.remove(path)
            if (second < 0).any():
                raise IntegrityError(f"chunk {k}: missing successor partition ids")
            return second

        return list(pool.map(collect, range(W)))

    def _release(self, arrays):
        for a in arrays:
            self.working.release(a.nbytes)

    def _label_step(self, pool, label):
        W = self.W
        seconds = self._gather(pool, label, f"l{label}")

        def route(k):
            lo = self.bounds[k]
            buf = self._buffer(f"p{k}", TRIPLE64, "resolve")
            for off, (c, s) in enumerate(zip(self.refs[k].tolist(), seconds[k].tolist())):
                p = zlib.crc32(_PAIR_KEY.pack(c, s)) % W
                buf.append(p, (c, s, lo + off))
            return buf.close()

        routed = list(pool.map(route, range(W)))
        self._release(seconds)

        def resolve(p):
            table = {}
            buf = self._buffer(f"r{p}", PAIR, "resolve")
            for k in range(W):
                for path in routed[k][p]:
                    for c, s, i in self.ctx.read(path, TRIPLE64, "resolve"):
                        local = table.get((c, s))
                        if local is None:
                            local = table[(c, s)] = len(table)
                            self.working.acquire(_PAIR_KEY.size)
                        buf.append(self._owner(i), (i, local))
                    self.ctx.remove(path)
            count = len(table)
            self.working.release(count * _PAIR_KEY.size)
            return count, buf.close()

        resolved = list(pool.map(resolve, range(W)))
        offsets = np.cumsum([0] + [c for c, _ in resolved]).tolist()

        def write_back(k):
            lo, hi = self.bounds[k], self.bounds[k + 1]
            nxt = np.full(hi - lo, -1, dtype=np.int64)
            for p in range(W):
                for path in resolved[p][1][k]:
                    for i, local in self.ctx.read(path, PAIR, "resolve"):
                        nxt[i - lo] = offsets[p] + local
                    self.ctx.remove(path)
            if (nxt < 0).any():
                raise IntegrityError(f"chunk {k}: states left without a partition")
            return nxt

        self.refs = list(pool.map(write_back, range(W)))
        return offsets[-1]

    def _collapse(self, pool):
        W, m = self.W, self.m
        k_total = self.state["curr"]
        table = np.full((k_total, m), -1, dtype=np.int64)
        for label in range(m):
            seconds = self._gather(pool, label, f"c{label}")

            def route(k):
                buf = self._buffer(f"x{k}", PAIR, "collapse")
                for c, s in zip(self.refs[k].tolist(), seconds[k].tolist()):
                    buf.append(c % W, (c, s))
                return buf.close()

            routed = list(pool.map(route, range(W)))
            self._release(seconds)

            def settle(p):
                rows = {}
                for k in range(W):
                    for path in routed[k][p]:
                        for c, s in self.ctx.read(path, PAIR, "collapse"):
                            have = rows.setdefault(c, s)
                            if have != s:
                                raise InvariantError(
                                    f"partition {c} is not stable under label {label}")
                        self.ctx.remove(path)
                return rows

            for rows in pool.map(settle, range(W)):
                for c, s in rows.items():
                    table[c, label] = s
        acc = np.zeros(k_total, dtype=bool)
        for k in range(W):
            bits = self._accepting_chunk(k).astype(bool)
            acc[self.refs[k][bits]] = True
        q0 = self.head.initial
        k0 = self._owner(q0)
        initial = int(self.refs[k0][q0 - self.bounds[k0]])
        if (table < 0).any():
            raise InvariantError("collapsed table has unfilled cells")
        return canonical_renumber(Dfa(m, k_total, initial, acc, table))

    # -- driver ----------------------------------------------------------

    def run(self, resume):
        if resume and self.ckpt.exists():
            self._resume()
        else:
            if resume and not self.cfg.checkpoint:
                raise InputError("resume needs checkpointing enabled")
            self._fresh()
        s = self.state
        if s["uniform"] is not None:
            m = self.m
            out = Dfa(m, 1, 0, [0] if s["uniform"] else [], np.zeros((1, m), dtype=np.int64))
        else:
            with ThreadPoolExecutor(max_workers=self.W) as pool:
                while s["prev"] < s["curr"]:
                    self._sweep(pool)
                clock = Stopwatch()
                self.scratch = self.root / "collapse"
                self.scratch.mkdir(exist_ok=True)
                out = self._collapse(pool)
                self.scratch.rmdir()
                self._close_step("collapse", clock)
        self.report.sweeps = len(s["counts"])
        self.report.counts = list(s["counts"])
        self.report.num_states = out.num_states
        self.report.complete = True
        return out

    def _sweep(self, pool):
        s = self.state
        sweep = s["sweep"] + 1
        clock = Stopwatch()
        self.scratch = self.root / f"s{sweep}"
        self.scratch.mkdir(exist_ok=True)
        before = s["curr"]
        count = before
        for label in range(self.m):
            count = self._label_step(pool, label)
        self.scratch.rmdir()
        s["prev"], s["curr"] = before, count
        s["counts"].append(count)
        s["sweep"] = sweep
        logger.debug("sweep %d: %d partitions", sweep, count)
        stale = self._save_refs(sweep)
        self._close_step(sweep, clock, partitions=count)
        self._commit(sweep, stale)


def ooc_minimize(dfa, cfg: OocConfig | None = None, workdir=None, resume=False,
                 on_superstep=None, trim=False, return_report=False):
    """File-backed forward refinement; returns the minimal DFA in memory.

    ``dfa`` is a :class:`DfaOnDisk`, a path to a packed DFA or a
    :class:`~fsakit.core.Dfa`.  The result equals ``minimize_forward(dfa)``.
    With ``return_report=True`` returns ``(dfa, report)``.  A packed input
    is refined as stored: unreachable states cost sweeps (the result is
    unaffected), so ``sweeps`` matches :func:`minimize_forward` only when every
    state is reachable.  In-memory inputs are pruned first.
    """
    cfg = cfg or OocConfig()
    if workdir is None:
        workdir = tempfile.mkdtemp(prefix="ooc-min-", dir=cfg.tmpdir)
    workdir = Path(workdir)
    if isinstance(dfa, Dfa):
        staged = workdir.parent / f".{workdir.name}.input.fsad"
        # in RAM anyway, so drop unreachable states up front like the in-memory tier
        staged.write_bytes(dumps_packed(canonical_renumber(dfa)))
        source = staged
    elif isinstance(dfa, DfaOnDisk):
        source = dfa.path
    elif isinstance(dfa, (str, os.PathLike)):
        source = Path(dfa)
    else:
        raise InputError(f"cannot minimize {type(dfa).__name__}")
    run = _Minimization(source, cfg, workdir, on_superstep)
    try:
        out = run.run(resume)
    except OSError as exc:
        if exc.errno == errno.ENOSPC:
            manifest = str(run.ckpt.path) if run.ckpt.exists() else None
            raise ResourceError(f"disk full in {workdir}", manifest=manifest) from exc
        raise
    finally:
        if isinstance(dfa, Dfa):
            os.remove(source)
    if trim:
        out = dfa_trim(out)
    return (out, run.report) if return_report else out
