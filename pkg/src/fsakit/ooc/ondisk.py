from __future__ import annotations

from pathlib import Path

from ..core import Dfa
from ..io import dumps_packed, loads_packed, read_packed_header


class DfaOnDisk:
    """A DFA stored in the packed binary format, plus the report of the run that made it."""

    def __init__(self, path, report=None):
        self.path = Path(path)
        self.report = report

    @classmethod
    def from_dfa(cls, dfa: Dfa, path):
        path = Path(path)
        path.write_bytes(dumps_packed(dfa))
        return cls(path)

    @property
    def header(self):
        return read_packed_header(self.path)

    @property
    def num_states(self):
        return self.header.n

    @property
    def alphabet_size(self):
        return self.header.m

    def read_bytes(self) -> bytes:
        return self.path.read_bytes()

    def load(self) -> Dfa:
        return loads_packed(self.read_bytes())

    def __repr__(self):
        return f"DfaOnDisk({str(self.path)!r})"
