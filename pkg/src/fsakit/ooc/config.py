from __future__ import annotations

import os
from dataclasses import asdict, dataclass

from .._errors import InputError
from .records import BLOCK

ENV_PREFIX = "AUTOSCALE_"
MIN_BUFFER = 4 * BLOCK


def _env_bool(text):
    value = text.strip().lower()
    if value in ("1", "on", "true", "yes"):
        return True
    if value in ("0", "off", "false", "no"):
        return False
    raise InputError(f"not a boolean: {text!r}")


@dataclass
class OocConfig:
    """Out-of-core engine settings.

    ``buffer_bytes`` is each worker's buffer budget: an expander splits it
    over its per-destination buckets and an owner sorts runs of at most that
    size.  Accounted buffer memory stays below ``memory_bound``.
    ``disk_limit`` caps live spill bytes (``None`` means unlimited).
    """

    workers: int = 4
    buffer_bytes: int = 8 << 20
    tmpdir: str | None = None
    checkpoint: bool = True
    disk_limit: int | None = None

    def __post_init__(self):
        if int(self.workers) < 1:
            raise InputError("workers must be >= 1")
        if int(self.buffer_bytes) < MIN_BUFFER:
            raise InputError(f"buffer_bytes must be >= {MIN_BUFFER}")
        self.workers = int(self.workers)
        self.buffer_bytes = int(self.buffer_bytes)

    @property
    def memory_bound(self) -> int:
        return self.buffer_bytes * (self.workers + 2)

    @classmethod
    def from_env(cls, environ=None, **overrides):
        """Defaults, then ``AUTOSCALE_*`` variables, then explicit non-None overrides."""
        env = os.environ if environ is None else environ
        values = {}
        parsers = {
            "workers": int,
            "buffer_bytes": int,
            "tmpdir": str,
            "checkpoint": _env_bool,
            "disk_limit": int,
        }
        for name, parse in parsers.items():
            raw = env.get(ENV_PREFIX + name.upper())
            if raw is not None:
                try:
                    values[name] = parse(raw)
                except ValueError:
                    raise InputError(f"bad value for {ENV_PREFIX}{name.upper()}: {raw!r}") from None
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def to_dict(self):
        return asdict(self)
