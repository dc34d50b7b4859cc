"""Accounting, streaming readers/writers, batch buffers and external sort."""

from __future__ import annotations

import errno
import heapq
import os
import threading
import time
import zlib
from collections import defaultdict
from contextlib import contextmanager
from pathlib import Path

from .._errors import IntegrityError
from .records import BLOCK, HEADER, MAGIC, TRAILER, _digest, read_header, seal


class MemoryMeter:
    """Bytes held in buffers, summed over threads, with a high-water mark."""

    def __init__(self):
        self._lock = threading.Lock()
        self.current = 0
        self.peak = 0

    def acquire(self, n):
        with self._lock:
            self.current += n
            if self.current > self.peak:
                self.peak = self.current

    def release(self, n):
        with self._lock:
            self.current -= n

    @contextmanager
    def hold(self, n):
        self.acquire(n)
        try:
            yield
        finally:
            self.release(n)


class DiskMeter:
    """Tracks live spill bytes, peak usage and traffic per phase.

    ``limit`` makes writes fail with ``ENOSPC`` once exceeded, which lets
    tests exercise the disk-full path.
    """

    def __init__(self, limit=None):
        self._lock = threading.Lock()
        self.limit = limit
        self.current = 0
        self.peak = 0
        self.sizes = {}
        self.written = defaultdict(int)
        self.read = defaultdict(int)

    def charge(self, n, phase):
        with self._lock:
            if self.limit is not None and self.current + n > self.limit:
                raise OSError(errno.ENOSPC, "disk limit reached")
            self.current += n
            self.peak = max(self.peak, self.current)
            self.written[phase] += n

    def settle(self, path, size):
        with self._lock:
            self.sizes[os.fspath(path)] = size

    def discharge(self, path):
        with self._lock:
            self.current -= self.sizes.pop(os.fspath(path), 0)

    def adopt(self, path):
        """Count an existing file (after resume) as live."""
        size = os.path.getsize(path)
        with self._lock:
            self.sizes[os.fspath(path)] = size
            self.current += size
            self.peak = max(self.peak, self.current)

    def note_read(self, n, phase):
        with self._lock:
            self.read[phase] += n


class RunWriter:
    def __init__(self, ctx, path, codec, phase):
        self.ctx, self.path, self.codec, self.phase = ctx, Path(path), codec, phase
        self.count = 0
        self.size = 0
        self._buf = bytearray()
        self._hash = _digest()
        ctx.memory.acquire(BLOCK)
        try:
            self._fh = open(self.path, "wb")
            self._emit(b"\0" * HEADER.size, hashed=False)
        except BaseException:
            ctx.memory.release(BLOCK)
            raise

    def _emit(self, data, hashed=True):
        self.ctx.disk.charge(len(data), self.phase)
        self._fh.write(data)
        self.size += len(data)
        if hashed:
            self._hash.update(data)

    def write(self, rec):
        self._buf += self.codec.encode(rec)
        self.count += 1
        if len(self._buf) >= BLOCK:
            self._emit(bytes(self._buf))
            self._buf.clear()

    def close(self):
        try:
            if self._buf:
                self._emit(bytes(self._buf))
                self._buf.clear()
            header = HEADER.pack(MAGIC, self.codec.kind, self.count)
            self._emit(seal(header, self._hash.digest()), hashed=False)
            self._fh.seek(0)
            self._fh.write(header)
            self._fh.close()
            self.ctx.disk.settle(self.path, self.size)
        finally:
            self.ctx.memory.release(BLOCK)

    def abort(self):
        self._fh.close()
        self.ctx.memory.release(BLOCK)
        self.ctx.disk.settle(self.path, self.size)
        self.ctx.remove(self.path)

    def __enter__(self):
        return self

    def __exit__(self, kind, exc, tb):
        if kind is None:
            self.close()
        else:
            self.abort()


class RunContext:
    """Shared accounting plus helpers to open, read and delete spill files."""

    def __init__(self, root, limit=None):
        self.root = Path(root)
        self.memory = MemoryMeter()
        self.disk = DiskMeter(limit)

    def writer(self, path, codec, phase):
        return RunWriter(self, path, codec, phase)

    def read(self, path, codec, phase):
        """Stream records of ``path`` in 4 KiB blocks, verifying as it goes."""
        path = os.fspath(path)  # an int here would be taken as a file descriptor
        self.memory.acquire(2 * BLOCK)
        try:
            with open(path, "rb", buffering=0) as fh:
                head, kind, count = read_header(fh, path)
                if kind != codec.kind:
                    raise IntegrityError(f"{path}: record kind {kind}, expected {codec.kind}")
                remaining = os.fstat(fh.fileno()).st_size - HEADER.size - TRAILER
                if remaining < 0:
                    raise IntegrityError(f"{path}: truncated")
                h = _digest()
                buf = b""
                pos = 0
                seen = 0
                decode = codec.decode
                while True:
                    while True:
                        rec, nxt = decode(buf, pos)
                        if rec is None:
                            break
                        pos = nxt
                        seen += 1
                        yield rec
                    if not remaining:
                        break
                    block = fh.read(min(BLOCK, remaining))
                    if not block:
                        raise IntegrityError(f"{path}: truncated body")
                    remaining -= len(block)
                    h.update(block)
                    self.disk.note_read(len(block), phase)
                    buf = buf[pos:] + block
                    pos = 0
                if pos != len(buf) or seen != count:
                    raise IntegrityError(f"{path}: record framing does not match header")
                if fh.read(TRAILER) != seal(head, h.digest()):
                    raise IntegrityError(f"{path}: checksum mismatch")
        finally:
            self.memory.release(2 * BLOCK)

    def remove(self, *paths):
        for p in paths:
            self.disk.discharge(p)
            try:
                os.remove(p)
            except FileNotFoundError:
                pass

    def write_all(self, path, codec, records, phase):
        with self.writer(path, codec, phase) as w:
            for rec in records:
                w.write(rec)
        return w.count


def partition_of(blob: bytes, partitions: int) -> int:
    # crc32 is stable across processes, unlike hash() on bytes.
    return zlib.crc32(blob) % partitions


class BatchBuffer:
    """Per-destination buckets that spill to chunk files when full.

    A bucket is flushed before an append would push it past ``threshold``
    bytes, so between flushes no bucket exceeds the threshold (unless a
    single record does).
    """

    def __init__(self, ctx, destinations, threshold, codec, name_for, phase):
        self.ctx = ctx
        self.codec = codec
        self.threshold = max(1, threshold)
        self.name_for = name_for
        self.phase = phase
        self.buckets = [[] for _ in range(destinations)]
        self.sizes = [0] * destinations
        self.files = [[] for _ in range(destinations)]

    def append(self, dest, rec):
        s = self.codec.size(rec)
        if self.sizes[dest] and self.sizes[dest] + s > self.threshold:
            self.flush(dest)
        self.buckets[dest].append(rec)
        self.sizes[dest] += s
        self.ctx.memory.acquire(s)

    def flush(self, dest):
        bucket = self.buckets[dest]
        if not bucket:
            return
        path = self.name_for(dest, len(self.files[dest]))
        self.ctx.write_all(path, self.codec, bucket, self.phase)
        self.files[dest].append(path)
        self.ctx.memory.release(self.sizes[dest])
        self.buckets[dest] = []
        self.sizes[dest] = 0

    def close(self):
        for d in range(len(self.buckets)):
            self.flush(d)
        return self.files


def merge_streams(ctx, paths, codec, key, phase):
    return heapq.merge(*(ctx.read(p, codec, phase) for p in paths), key=key)


def external_sort(ctx, inputs, out, codec, key, budget, phase, remove_inputs=True):
    """Sort the records of ``inputs`` into ``out``; return the record count.

    Runs of at most ``budget`` encoded bytes are sorted in memory, then
    merged with a bounded fan-in.
    """
    out = Path(out)
    fan_in = max(2, min(8, budget // BLOCK - 1))
    runs = []
    batch = []
    held = 0

    def spill():
        nonlocal batch, held
        batch.sort(key=key)
        path = out.with_name(f"{out.name}.r{len(runs)}")
        ctx.write_all(path, codec, batch, phase)
        runs.append(path)
        ctx.memory.release(held)
        batch, held = [], 0

    try:
        for path in inputs:
            for rec in ctx.read(path, codec, phase):
                s = codec.size(rec)
                if held and held + s > budget:
                    spill()
                batch.append(rec)
                held += s
                ctx.memory.acquire(s)
        if batch or not runs:
            spill()
    finally:
        ctx.memory.release(held)
    if remove_inputs:
        ctx.remove(*inputs)

    generation = 0
    while len(runs) > 1:
        merged = []
        for i in range(0, len(runs), fan_in):
            group = runs[i:i + fan_in]
            if len(group) == 1 and len(runs) > fan_in:
                merged.append(group[0])
                continue
            target = out if len(runs) <= fan_in else out.with_name(f"{out.name}.m{generation}.{i}")
            ctx.write_all(target, codec, merge_streams(ctx, group, codec, key, phase), phase)
            ctx.remove(*group)
            merged.append(target)
        runs = merged
        generation += 1
    if runs[0] != out:
        ctx.disk.settle(out, ctx.disk.sizes.pop(os.fspath(runs[0]), 0))
        os.replace(runs[0], out)
    with open(out, "rb") as fh:
        _, _, count = read_header(fh, out)
    return count


class Stopwatch:
    def __init__(self):
        self.start = time.perf_counter()

    def elapsed(self):
        return time.perf_counter() - self.start
