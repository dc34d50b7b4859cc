"""File-backed tier: batched scatter-gather over partitioned spill files."""

from .config import OocConfig
from .determinize import ooc_determinize
from .minimize import ooc_minimize
from .ondisk import DfaOnDisk
from .report import RunReport, ooc_stats

__all__ = ["OocConfig", "DfaOnDisk", "RunReport", "ooc_determinize", "ooc_minimize", "ooc_stats"]
