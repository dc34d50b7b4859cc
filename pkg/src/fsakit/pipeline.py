"""Declarative pipelines of automaton operations.

A pipeline spec is YAML::

    version: 1
    seed: 0                 # echoed in the report
    workdir: out            # relative paths resolve here (default: spec dir)
    stages:
      - op: tpn-gen
        family: buffer-stack
        buffer: 3
        depth: 4
        out: tpn.fsa
      - op: determinize     # input defaults to the previous stage's output
        engine: ooc
        out: det.fsad
      - op: minimize
        algo: forward
        out: min.fsad
      - op: stats

Operations: ``tpn-gen``, ``determinize``, ``minimize``, ``complement``,
``reverse``, ``intersect`` and ``stats``.  ``intersect`` takes ``in: [a, b]``,
or ``in: [b]`` to intersect the previous output with ``b``.
Every stage except ``stats`` writes its result; ``.fsad`` outputs use the
packed binary format and need a DFA.
"""

from __future__ import annotations

import os
import resource
import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ._errors import FsaError, InputError
from .core import Dfa, Nfa, dfa_complement, intersect, reverse
from .determinize import POLICIES, determinize, determinize_mt
from .io import read_automaton, write_automaton
from .minimize import MINIMIZERS, minimize_forward, minimize_forward_mt
from .ooc import OocConfig, ooc_determinize, ooc_minimize
from .tpn import FAMILIES, NetworkSpec, build_achievable_nfa, build_network, check_alphabet_bound
from .validation import ENGINES, check_choice, check_int

SPEC_VERSION = 1
FORMATS = {"fsa": 1, "fsad": 1, "spill": "OOC1"}

_COMMON = {"op", "in", "out"}
_OOC = {"buffer_bytes", "checkpoint"}
STAGE_KEYS = {
    "tpn-gen": {"family", "buffer", "depth", "max_rank"},
    "determinize": {"engine", "policy", "workers", "partitions", "max_states"} | _OOC,
    "minimize": {"algo", "engine", "workers", "trim"} | _OOC,
    "complement": set(),
    "reverse": set(),
    "intersect": set(),
    "stats": set(),
}
# (input kind, output kind); None means any.
_KINDS = {
    "tpn-gen": (None, "nfa"),
    "determinize": (None, "dfa"),
    "minimize": ("dfa", "dfa"),
    "complement": ("dfa", "dfa"),
    "reverse": (None, "nfa"),
    "intersect": ("dfa", "dfa"),
    "stats": (None, None),
}


@dataclass
class StageSpec:
    op: str
    options: dict = field(default_factory=dict)
    inputs: list | None = None
    out: str | None = None


@dataclass
class PipelineSpec:
    stages: list
    seed: int = 0
    workdir: Path = Path(".")
    tmpdir: Path | None = None
    version: int = SPEC_VERSION

    @classmethod
    def from_dict(cls, doc, base=None):
        if not isinstance(doc, dict):
            raise InputError("pipeline spec must be a mapping")
        unknown = set(doc) - {"version", "seed", "workdir", "tmpdir", "stages"}
        if unknown:
            raise InputError(f"unknown pipeline keys: {sorted(unknown)}")
        if doc.get("version") != SPEC_VERSION:
            raise InputError(f"pipeline spec needs 'version: {SPEC_VERSION}'")
        base = Path(base or ".")
        workdir = base / doc.get("workdir", ".")
        tmpdir = doc.get("tmpdir")
        stages = []
        for i, raw in enumerate(doc.get("stages") or []):
            if not isinstance(raw, dict) or "op" not in raw:
                raise InputError(f"stage {i}: needs an 'op'")
            op = check_choice(f"stage {i} op", raw["op"], tuple(STAGE_KEYS))
            extra = set(raw) - _COMMON - STAGE_KEYS[op]
            if extra:
                raise InputError(f"stage {i} ({op}): unknown options {sorted(extra)}")
            inputs = raw.get("in")
            if inputs is not None and not isinstance(inputs, list):
                inputs = [inputs]
            options = {k: v for k, v in raw.items() if k not in _COMMON}
            stages.append(StageSpec(op, options, inputs, raw.get("out")))
        spec = cls(stages, check_int("seed", doc.get("seed", 0)), workdir,
                   workdir / tmpdir if tmpdir else None)
        spec.validate()
        return spec

    @classmethod
    def from_yaml(cls, text, base=None):
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise InputError(f"pipeline spec is not valid YAML: {exc}") from None
        return cls.from_dict(doc, base)

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise InputError(f"cannot read pipeline spec {path}: {exc}") from None
        return cls.from_yaml(text, path.parent)

    def validate(self):
        """Check options and the automaton kinds flowing between stages."""
        produced = {}
        prev = None
        for i, st in enumerate(self.stages):
            where = f"stage {i} ({st.op})"
            o = st.options
            if st.op == "tpn-gen":
                check_choice(f"{where} family", o.get("family", "buffer-stack"), FAMILIES)
                check_int(f"{where} depth", o.get("depth"), 1)
                check_int(f"{where} buffer", o.get("buffer", 3), 1)
                if st.inputs:
                    raise InputError(f"{where}: takes no input")
            if "engine" in o:
                check_choice(f"{where} engine", o["engine"], ENGINES)
            if "policy" in o:
                check_choice(f"{where} policy", o["policy"], POLICIES)
            if "algo" in o:
                check_choice(f"{where} algo", o["algo"], tuple(MINIMIZERS))
                if o.get("engine", "seq") != "seq" and o["algo"] != "forward":
                    raise InputError(f"{where}: engine {o['engine']} supports algo forward only")
            for key in ("workers", "partitions", "max_states", "buffer_bytes"):
                if key in o:
                    check_int(f"{where} {key}", o[key], 1)
            want, gives = _KINDS[st.op]
            arity = 2 if st.op == "intersect" else (0 if st.op == "tpn-gen" else 1)
            inputs = st.inputs
            if st.op == "intersect":
                # One listed input means: previous output intersected with it.
                if not inputs or len(inputs) > 2:
                    raise InputError(f"{where}: 'in' must list one or two inputs")
                if len(inputs) == 1:
                    if prev is None:
                        raise InputError(f"{where}: one input listed and no previous stage")
                    inputs = [prev] + inputs
            elif inputs is None and arity:
                if prev is None:
                    raise InputError(f"{where}: no input and no previous stage")
                inputs = [prev]
            elif arity and len(inputs) != arity:
                raise InputError(f"{where}: expects {arity} input")
            for src in inputs or []:
                kind = produced.get(src)
                if want and kind and kind != want:
                    raise InputError(f"{where}: expects a {want.upper()}, but {src} holds an {kind.upper()}")
            if st.op == "stats" and st.out is not None:
                raise InputError(f"{where}: writes no output")
            if st.out is not None:
                if str(st.out).endswith(".fsad") and gives != "dfa":
                    raise InputError(f"{where}: packed output needs a DFA")
                produced[st.out] = gives
                prev = st.out
            elif st.op != "stats":
                st.out = f"stage{i}-{st.op}.fsa" if gives == "nfa" else f"stage{i}-{st.op}.fsad"
                produced[st.out] = gives
                prev = st.out

    def to_dict(self):
        return {
            "version": self.version,
            "seed": self.seed,
            "workdir": str(self.workdir),
            "tmpdir": str(self.tmpdir) if self.tmpdir else None,
            "stages": [{"op": s.op, "in": s.inputs, "out": s.out, **s.options} for s in self.stages],
        }


def _peak_rss_bytes():
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024


def _stats(a):
    d = {"kind": "dfa" if isinstance(a, Dfa) else "nfa", "states": a.num_states,
         "alphabet": a.alphabet_size, "accepting": len(a.accepting)}
    if isinstance(a, Dfa):
        d["transitions"] = int((a.table >= 0).sum())
        d["complete"] = bool(a.is_complete)
    else:
        d["transitions"] = a.num_transitions
    return d


class _Runner:
    def __init__(self, spec: PipelineSpec):
        self.spec = spec
        self.cache = {}
        self.tmp = spec.tmpdir or spec.workdir / "tmp"

    def path(self, rel):
        return self.spec.workdir / rel

    def load(self, ref, want):
        a = self.cache.get(ref)
        if a is None:
            try:
                a = read_automaton(self.path(ref))
            except OSError as exc:
                raise InputError(f"cannot read {ref}: {exc.strerror or exc}") from None
            self.cache[ref] = a
        if want == "dfa" and not isinstance(a, Dfa):
            raise InputError(f"{ref} holds an NFA where a DFA is required")
        return a

    def ooc_config(self, o):
        return OocConfig.from_env(
            workers=o.get("workers"), buffer_bytes=o.get("buffer_bytes"),
            tmpdir=str(self.tmp), checkpoint=o.get("checkpoint"),
        )

    def run_stage(self, i, st):
        o = st.options
        want, _ = _KINDS[st.op]
        inputs = st.inputs
        if inputs is None and st.op != "tpn-gen":
            inputs = [self.prev]
        elif st.op == "intersect" and len(inputs) == 1:
            inputs = [self.prev] + inputs
        row = {"stage": i, "op": st.op, "input": inputs, "output": st.out}
        args = [self.load(ref, want) for ref in inputs or []]
        if args:
            row["input_states"] = sum(a.num_states for a in args)
        rss_before = _peak_rss_bytes()
        t0 = time.perf_counter()
        result = None
        engine = o.get("engine", "seq")
        if st.op == "tpn-gen":
            ns = NetworkSpec(o.get("family", "buffer-stack"), o["depth"], o.get("buffer", 3))
            tpn = build_network(ns)
            bound = check_alphabet_bound(ns, tpn)
            result = build_achievable_nfa(tpn, o.get("max_rank") or bound)
        elif st.op == "determinize":
            nfa = args[0].to_nfa() if isinstance(args[0], Dfa) else args[0]
            policy = o.get("policy", "drop")
            row["engine"] = engine
            if engine == "seq":
                result, profile = determinize(nfa, policy, o.get("max_states"))
            elif engine == "mt":
                result, profile = determinize_mt(nfa, o.get("workers", 4), o.get("partitions"),
                                                 policy, o.get("max_states"))
            else:
                cfg = self.ooc_config(o)
                run = ooc_determinize(nfa, cfg, policy, o.get("max_states"),
                                      workdir=self.tmp / f"stage{i}")
                result, profile = run.load(), run.report.profile
                row["peak_memory_bytes"] = run.report.peak_memory_bytes
                row["peak_disk_bytes"] = run.report.peak_disk_bytes
                shutil.rmtree(self.tmp / f"stage{i}", ignore_errors=True)
            row["levels"] = len(profile) or None
            row["profile"] = profile
        elif st.op == "minimize":
            algo = o.get("algo", "forward")
            trim = bool(o.get("trim", False))
            row["engine"], row["algo"] = engine, algo
            if engine == "ooc":
                result, rep = ooc_minimize(args[0], self.ooc_config(o), workdir=self.tmp / f"stage{i}",
                                           trim=trim, return_report=True)
                row["sweeps"] = rep.sweeps
                row["peak_memory_bytes"] = rep.peak_memory_bytes
                row["peak_disk_bytes"] = rep.peak_disk_bytes
                shutil.rmtree(self.tmp / f"stage{i}", ignore_errors=True)
            elif engine == "mt":
                result, row["sweeps"] = minimize_forward_mt(args[0], o.get("workers", 4),
                                                            return_sweeps=True, trim=trim)
            elif algo == "forward":
                result, row["sweeps"] = minimize_forward(args[0], return_sweeps=True, trim=trim)
            else:
                result = MINIMIZERS[algo](args[0], trim=trim)
        elif st.op == "complement":
            result = dfa_complement(args[0])
        elif st.op == "reverse":
            result = reverse(args[0])
        elif st.op == "intersect":
            result = intersect(*args)
        elif st.op == "stats":
            row["stats"] = _stats(args[0])
        row["wall_seconds"] = time.perf_counter() - t0
        row.setdefault("peak_memory_bytes", max(_peak_rss_bytes(), rss_before))
        row.setdefault("peak_disk_bytes", 0)
        if result is not None:
            row["output_states"] = result.num_states
            target = self.path(st.out)
            target.parent.mkdir(parents=True, exist_ok=True)
            write_automaton(result, target)
            self.cache[st.out] = result
            self.prev = st.out
        return row


def run_pipeline(spec: PipelineSpec | dict | str | os.PathLike) -> dict:
    """Run every stage in order and return the report.

    Errors are re-raised with the same class (so exit codes survive) and a
    ``stage N (op):`` prefix; ``err.report`` holds the partial report.
    """
    if isinstance(spec, dict):
        spec = PipelineSpec.from_dict(spec)
    elif not isinstance(spec, PipelineSpec):
        spec = PipelineSpec.load(spec)
    spec.workdir.mkdir(parents=True, exist_ok=True)
    runner = _Runner(spec)
    runner.prev = None
    report = {
        "version": SPEC_VERSION,
        "seed": spec.seed,
        "config": spec.to_dict(),
        "formats": FORMATS,
        "stages": [],
        "status": "ok",
    }
    t0 = time.perf_counter()
    for i, st in enumerate(spec.stages):
        try:
            report["stages"].append(runner.run_stage(i, st))
        except FsaError as exc:
            report["status"] = "failed"
            report["error"] = f"stage {i} ({st.op}): {exc}"
            err = type(exc).__new__(type(exc))
            err.args = (report["error"],)
            err.__dict__.update(exc.__dict__)
            err.report = report
            raise err from exc
    report["wall_seconds"] = time.perf_counter() - t0
    return report
