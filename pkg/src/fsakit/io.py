"""Text and packed-binary automaton formats.

Text (UTF-8, ``#`` starts a comment)::

    fsa dfa
    alphabet 2
    states 3
    initial 0
    accepting 1 2
    transitions 4
    0 0 1
    ...

Packed binary DFA (``.fsad``): magic ``FSAD``, version byte ``1``, then
little-endian u64 ``m``, ``n``, ``initial``; the accepting set as a bitmask
of ``ceil(n/8)`` bytes (bit ``q % 8`` of byte ``q // 8``); then ``n*m``
little-endian u64 successors in state-major order, all-ones meaning
undefined.
"""

from __future__ import annotations

import io
import os
import struct

import numpy as np

from ._errors import InputError
from .core import UNDEFINED, Dfa, Nfa

__all__ = [
    "MAGIC",
    "VERSION",
    "SENTINEL",
    "PackedHeader",
    "dumps_text",
    "loads_text",
    "dumps_packed",
    "loads_packed",
    "read_automaton",
    "write_automaton",
    "read_packed_header",
]

MAGIC = b"FSAD"
VERSION = 1
SENTINEL = 0xFFFF_FFFF_FFFF_FFFF
_HEAD = struct.Struct("<4sBQQQ")


def dumps_text(automaton) -> str:
    kind = "dfa" if isinstance(automaton, Dfa) else "nfa"
    triples = list(automaton.transitions())
    acc = sorted(automaton.accepting)
    lines = [
        f"fsa {kind}",
        f"alphabet {automaton.alphabet_size}",
        f"states {automaton.num_states}",
        f"initial {automaton.initial}",
        "accepting " + " ".join(str(x) for x in [len(acc), *acc]),
        f"transitions {len(triples)}",
    ]
    lines += [f"{q} {a} {r}" for q, a, r in triples]
    return "\n".join(lines) + "\n"


def _tokens(text):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def loads_text(text: str):
    lines = _tokens(text)

    def expect(word):
        try:
            lineno, parts = next(lines)
        except StopIteration:
            raise InputError(f"unexpected end of file, expected {word!r}") from None
        if parts[0] != word:
            raise InputError(f"line {lineno}: expected {word!r}, got {parts[0]!r}")
        try:
            return lineno, [int(x) for x in parts[1:]] if word != "fsa" else parts[1:]
        except ValueError:
            raise InputError(f"line {lineno}: non-integer field") from None

    _, kind = expect("fsa")
    if kind not in (["nfa"], ["dfa"]):
        raise InputError(f"unknown automaton kind {kind}")
    _, (m,) = expect("alphabet")
    _, (n,) = expect("states")
    _, (initial,) = expect("initial")
    lineno, acc = expect("accepting")
    if not acc or acc[0] != len(acc) - 1:
        raise InputError(f"line {lineno}: accepting count does not match the listed ids")
    _, (t,) = expect("transitions")
    triples = []
    for _ in range(t):
        try:
            lineno, parts = next(lines)
        except StopIteration:
            raise InputError("fewer transition lines than declared") from None
        if len(parts) != 3:
            raise InputError(f"line {lineno}: a transition needs 3 fields")
        try:
            triples.append(tuple(int(x) for x in parts))
        except ValueError:
            raise InputError(f"line {lineno}: non-integer field") from None
    extra = next(lines, None)
    if extra is not None:
        raise InputError(f"line {extra[0]}: trailing content after transitions")
    if kind == ["dfa"]:
        return Dfa.from_transitions(m, n, initial, acc[1:], triples)
    return Nfa(m, n, initial, acc[1:], triples)


def dumps_packed(dfa: Dfa) -> bytes:
    if not isinstance(dfa, Dfa):
        raise InputError("the packed format holds DFAs only")
    n, m = dfa.num_states, dfa.alphabet_size
    bits = np.packbits(dfa.accepting_mask, bitorder="little")
    table = dfa.table.astype(np.uint64)
    table[dfa.table == UNDEFINED] = SENTINEL
    return b"".join([
        _HEAD.pack(MAGIC, VERSION, m, n, dfa.initial),
        bits.tobytes(),
        table.astype("<u8").tobytes(),
    ])


class PackedHeader:
    """Field offsets of a packed DFA, for streaming readers."""

    def __init__(self, m, n, initial):
        self.m, self.n, self.initial = m, n, initial
        self.bits_offset = _HEAD.size
        self.bits_size = (n + 7) // 8
        self.table_offset = self.bits_offset + self.bits_size
        self.size = self.table_offset + 8 * n * m

    @classmethod
    def parse(cls, head: bytes):
        if len(head) < _HEAD.size:
            raise InputError("truncated packed DFA header")
        magic, version, m, n, initial = _HEAD.unpack_from(head)
        if magic != MAGIC:
            raise InputError("not a packed DFA (bad magic)")
        if version != VERSION:
            raise InputError(f"unsupported packed DFA version {version}")
        if n < 1 or initial >= n:
            raise InputError("packed DFA header out of range")
        return cls(m, n, initial)


def read_packed_header(path) -> PackedHeader:
    with open(path, "rb") as fh:
        return PackedHeader.parse(fh.read(_HEAD.size))


def loads_packed(data: bytes) -> Dfa:
    h = PackedHeader.parse(data)
    if len(data) != h.size:
        raise InputError(f"packed DFA has {len(data)} bytes, expected {h.size}")
    bits = np.frombuffer(data, dtype=np.uint8, count=h.bits_size, offset=h.bits_offset)
    acc = np.unpackbits(bits, bitorder="little", count=h.n).astype(bool)
    raw = np.frombuffer(data, dtype="<u8", count=h.n * h.m, offset=h.table_offset)
    table = np.where(raw == SENTINEL, UNDEFINED, raw.astype(np.int64)).reshape(h.n, h.m)
    return Dfa(h.m, h.n, h.initial, acc, table)


def _is_packed_path(path):
    return os.fspath(path).endswith(".fsad")


def read_automaton(path):
    """Read a text or packed automaton, sniffing the packed magic."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] == MAGIC:
        return loads_packed(data)
    try:
        return loads_text(data.decode("utf-8"))
    except UnicodeDecodeError:
        raise InputError(f"{path}: neither a packed DFA nor UTF-8 text") from None


def write_automaton(automaton, path, fmt=None):
    """Write ``automaton``; ``fmt`` is ``fsa`` or ``fsad`` (default: by extension)."""
    if fmt is None:
        fmt = "fsad" if _is_packed_path(path) else "fsa"
    if fmt == "fsad":
        data = dumps_packed(automaton)
        with open(path, "wb") as fh:
            fh.write(data)
    elif fmt == "fsa":
        with io.open(path, "w", encoding="utf-8") as fh:
            fh.write(dumps_text(automaton))
    else:
        raise InputError(f"unknown format {fmt!r}")
