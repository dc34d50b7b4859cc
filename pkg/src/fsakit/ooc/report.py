from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .._errors import InputError
from .checkpoint import MANIFEST


@dataclass
class RunReport:
    """Observables of an out-of-core run.

    ``supersteps`` has one entry per BFS level or refinement sweep, with its
    wall time and spill traffic.  Byte counters are per phase.  Peaks are
    maxima over the whole run, including segments before a resume.
    ``peak_memory_bytes`` covers buffers and is what ``memory_bound``
    limits; ``peak_working_set_bytes`` is the per-partition state (refs
    chunks and pair tables) held by the minimizer.
    """

    kind: str
    workers: int
    buffer_bytes: int
    memory_bound: int
    profile: list = field(default_factory=list)
    counts: list = field(default_factory=list)
    supersteps: list = field(default_factory=list)
    bytes_written: dict = field(default_factory=dict)
    bytes_read: dict = field(default_factory=dict)
    peak_disk_bytes: int = 0
    peak_memory_bytes: int = 0
    peak_working_set_bytes: int = 0
    num_states: int | None = None
    sweeps: int | None = None
    resumed: int = 0
    complete: bool = False

    @property
    def wall_seconds(self):
        return sum(s["wall_seconds"] for s in self.supersteps)

    def to_dict(self):
        d = asdict(self)
        d["wall_seconds"] = self.wall_seconds
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("wall_seconds", None)
        return cls(**d)

    def absorb(self, ctx):
        """Fold a run context's meters into the cumulative counters."""
        for phase, n in ctx.disk.written.items():
            self.bytes_written[phase] = self.bytes_written.get(phase, 0) + n
        for phase, n in ctx.disk.read.items():
            self.bytes_read[phase] = self.bytes_read.get(phase, 0) + n
        ctx.disk.written.clear()
        ctx.disk.read.clear()
        self.peak_disk_bytes = max(self.peak_disk_bytes, ctx.disk.peak)
        self.peak_memory_bytes = max(self.peak_memory_bytes, ctx.memory.peak)


def ooc_stats(run) -> RunReport:
    """Report of a finished run, or of a checkpointed one given its directory."""
    report = getattr(run, "report", None)
    if isinstance(run, RunReport):
        return run
    if report is not None:
        return report
    if isinstance(run, (str, Path)):
        path = Path(run)
        if path.is_dir():
            path = path / MANIFEST
        try:
            with open(path) as fh:
                doc = json.load(fh)
            return RunReport.from_dict(doc["state"]["report"])
        except (OSError, ValueError, KeyError) as exc:
            raise InputError(f"{run}: no run report ({exc})") from None
    raise InputError(f"cannot report on {type(run).__name__}")
