"""Finite-state automata: determinization, minimization and token passing networks."""

from ._errors import FsaError, InputError, IntegrityError, InvariantError, ResourceError
from .core import (
    UNDEFINED,
    Dfa,
    Nfa,
    canonical_renumber,
    dfa_accepts,
    dfa_complement,
    dfa_complete,
    dfa_trim,
    equivalent,
    intersect,
    isomorphic,
    nfa_accepts,
    reverse,
)
from .determinize import (
    determinize,
    determinize_mt,
    level_profile,
    subset_construction,
    subset_stats,
)
from .minimize import (
    MINIMIZERS,
    minimize_brzozowski,
    minimize_forward,
    minimize_forward_mt,
    minimize_hopcroft,
)
from .ooc import DfaOnDisk, OocConfig, RunReport, ooc_determinize, ooc_minimize, ooc_stats
from .estimators import Complementer, Determinizer, Minimizer, Reverser
from .fuzz import FuzzLimits, Verdict, fuzz_equivalence
from .pipeline import PipelineSpec, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "FsaError", "InputError", "IntegrityError", "InvariantError", "ResourceError",
    "UNDEFINED", "Nfa", "Dfa",
    "nfa_accepts", "dfa_accepts", "dfa_complete", "dfa_complement", "dfa_trim",
    "reverse", "intersect", "equivalent", "canonical_renumber", "isomorphic",
    "determinize", "determinize_mt", "level_profile", "subset_construction", "subset_stats",
    "minimize_forward", "minimize_forward_mt", "minimize_hopcroft", "minimize_brzozowski",
    "MINIMIZERS",
    "OocConfig", "DfaOnDisk", "RunReport", "ooc_determinize", "ooc_minimize", "ooc_stats",
    "Determinizer", "Minimizer", "Complementer", "Reverser",
    "FuzzLimits", "Verdict", "fuzz_equivalence",
    "PipelineSpec", "run_pipeline",
]
