"""Spill-file record formats.

Every file is ``header | body | trailer``.  The 16-byte header holds the
magic ``OOC1``, the record kind (u32) and the record count (u64); the
trailer is an 8-byte BLAKE2b digest of the header followed by the body's
own 8-byte digest, so a file can be checksummed while it streams.
"""

from __future__ import annotations

import hashlib
import os
import struct

from .._errors import IntegrityError

MAGIC = b"OOC1"
HEADER = struct.Struct("<4sIQ")
TRAILER = 8
BLOCK = 4096

KIND_TRIPLE = 1
KIND_SUBSET = 2
KIND_PAIR = 3
KIND_U64 = 4
KIND_TRIPLE64 = 5


def _digest(data=b""):
    return hashlib.blake2b(data, digest_size=8)


def seal(header: bytes, body_digest: bytes) -> bytes:
    return _digest(header + body_digest).digest()


def encode_members(members) -> bytes:
    """Varint-delta encoding of a strictly increasing id sequence."""
    out = bytearray()
    prev = 0
    for q in members:
        d = q - prev
        prev = q
        while d >= 0x80:
            out.append((d & 0x7F) | 0x80)
            d >>= 7
        out.append(d)
    return bytes(out)


def decode_members(count: int, blob: bytes):
    out = []
    prev = 0
    pos = 0
    for _ in range(count):
        shift = 0
        d = 0
        while True:
            b = blob[pos]
            pos += 1
            d |= (b & 0x7F) << shift
            if b < 0x80:
                break
            shift += 7
        prev += d
        out.append(prev)
    return tuple(out)


class FixedCodec:
    """Tuples packed with a fixed struct layout."""

    def __init__(self, kind, fmt):
        self.kind = kind
        self.struct = struct.Struct(fmt)
        self.width = self.struct.size

    def encode(self, rec):
        return self.struct.pack(*rec)

    def decode(self, buf, pos):
        end = pos + self.width
        if end > len(buf):
            return None, pos
        return self.struct.unpack_from(buf, pos), end

    def size(self, rec):
        return self.width


class U64Codec(FixedCodec):
    def __init__(self):
        super().__init__(KIND_U64, "<Q")

    def encode(self, rec):
        return self.struct.pack(rec)

    def decode(self, buf, pos):
        rec, end = super().decode(buf, pos)
        return (None if rec is None else rec[0]), end


class SubsetCodec:
    """``(id, member_count, varint_delta_blob)``; u64 id, u32 count."""

    kind = KIND_SUBSET
    _head = struct.Struct("<QI")

    def encode(self, rec):
        sid, count, blob = rec
        return self._head.pack(sid, count) + blob

    def decode(self, buf, pos):
        start = pos + 12
        if start > len(buf):
            return None, pos
        sid, count = self._head.unpack_from(buf, pos)
        end = start
        n = len(buf)
        for _ in range(count):
            while True:
                if end >= n:
                    return None, pos
                b = buf[end]
                end += 1
                if b < 0x80:
                    break
        return (sid, count, bytes(buf[start:end])), end

    def size(self, rec):
        return 12 + len(rec[2])


TRIPLE = FixedCodec(KIND_TRIPLE, "<QIQ")
TRIPLE64 = FixedCodec(KIND_TRIPLE64, "<QQQ")
PAIR = FixedCodec(KIND_PAIR, "<QQ")
U64 = U64Codec()
SUBSET = SubsetCodec()


def read_header(fh, path):
    head = fh.read(HEADER.size)
    if len(head) != HEADER.size:
        raise IntegrityError(f"{path}: truncated header")
    magic, kind, count = HEADER.unpack(head)
    if magic != MAGIC:
        raise IntegrityError(f"{path}: bad magic")
    return head, kind, count


def verify_file(path, kind=None):
    """Check header, size and checksum without decoding; return the record count."""
    with open(path, "rb") as fh:
        head, found, count = read_header(fh, path)
        if kind is not None and found != kind:
            raise IntegrityError(f"{path}: record kind {found}, expected {kind}")
        body = os.fstat(fh.fileno()).st_size - HEADER.size - TRAILER
        if body < 0:
            raise IntegrityError(f"{path}: truncated")
        h = _digest()
        left = body
        while left:
            chunk = fh.read(min(1 << 20, left))
            if not chunk:
                raise IntegrityError(f"{path}: truncated body")
            h.update(chunk)
            left -= len(chunk)
        if fh.read(TRAILER) != seal(head, h.digest()):
            raise IntegrityError(f"{path}: checksum mismatch")
    return count


def file_checksum(path) -> str:
    with open(path, "rb") as fh:
        fh.seek(-TRAILER, os.SEEK_END)
        return fh.read(TRAILER).hex()
