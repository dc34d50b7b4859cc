"""Command-line entry point.

Exit codes: 0 success, 2 input error, 3 resource or integrity error,
4 invariant violation (including a failing ``fuzz`` run).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import shutil
import sys
import time
from pathlib import Path

from . import __version__
from ._errors import FsaError, InputError, InvariantError
from .core import Dfa, dfa_complement, intersect, reverse
from .determinize import POLICIES, determinize, determinize_mt
from .fuzz import FuzzLimits, fuzz_equivalence
from .io import read_automaton, write_automaton
from .minimize import MINIMIZERS, minimize_forward, minimize_forward_mt
from .ooc import OocConfig, ooc_determinize, ooc_minimize
from .pipeline import PipelineSpec, run_pipeline
from .tpn import (
    FAMILIES,
    NetworkSpec,
    build_achievable_nfa,
    build_network,
    catalan,
    check_alphabet_bound,
    count_achievable,
)
from .validation import ENGINES

logger = logging.getLogger("fsakit")


def _global_options(p, suppress):
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--tmpdir", default=default,
                   help="scratch space for out-of-core runs (default: ./tmp)")
    p.add_argument("--report-json", default=default, metavar="PATH",
                   help="write a machine-readable report here")
    p.add_argument("--quiet", action="store_true", default=default if suppress else False,
                   help="no summary on standard error")


def _ooc_options(p):
    p.add_argument("--buffer-bytes", type=int, help="ooc: per-worker buffer budget")
    p.add_argument("--checkpoint", choices=("on", "off"), help="ooc: write superstep manifests")
    p.add_argument("--workdir", help="ooc: run directory (default: <tmpdir>/<command>)")
    p.add_argument("--resume", action="store_true", help="ooc: continue from the run directory's manifest")


def build_parser():
    parser = argparse.ArgumentParser(prog="fsakit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help):
        p = sub.add_parser(name, help=help)
        _global_options(p, suppress=True)
        return p

    p = command("tpn-gen", "write the achievable-permutation NFA of a network")
    p.add_argument("--family", choices=FAMILIES, default="buffer-stack")
    p.add_argument("--buffer", type=int, default=3)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--max-rank", type=int, help="alphabet size (default: computed bound)")
    p.add_argument("--out", required=True)

    p = command("tpn-check", "count achievable permutations by brute force, as CSV")
    p.add_argument("--family", choices=FAMILIES, default="buffer-stack")
    p.add_argument("--buffer", type=int, default=3)
    p.add_argument("--depth", type=int, help="stack depth (default for family 'stack': N)")
    p.add_argument("--n", type=int, required=True, dest="n")
    p.add_argument("--out", help="CSV path (default: standard output)")

    p = command("determinize", "subset construction")
    p.add_argument("--in", required=True, dest="input")
    p.add_argument("--out", required=True)
    p.add_argument("--engine", choices=ENGINES, default="seq")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--partitions", type=int)
    p.add_argument("--policy", choices=POLICIES + ("drop-empty-set", "keep-empty-set"), default="drop")
    p.add_argument("--max-states", type=int)
    p.add_argument("--profile-csv", help="write the BFS frontier profile (level,new_states)")
    _ooc_options(p)

    p = command("minimize", "minimal complete DFA")
    p.add_argument("--in", required=True, dest="input")
    p.add_argument("--out", required=True)
    p.add_argument("--algo", choices=tuple(MINIMIZERS), default="forward")
    p.add_argument("--engine", choices=ENGINES, default="seq")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--trim", action="store_true", help="drop the rejecting sink")
    _ooc_options(p)

    p = command("complement", "complement of a DFA")
    p.add_argument("--in", required=True, dest="input")
    p.add_argument("--out", required=True)

    p = command("reverse", "reversal, as an NFA")
    p.add_argument("--in", required=True, dest="input")
    p.add_argument("--out", required=True)

    p = command("intersect", "product of two DFAs")
    p.add_argument("--in", required=True, dest="input", nargs=2, metavar=("A", "B"))
    p.add_argument("--out", required=True)

    p = command("pipeline", "run a YAML pipeline spec")
    p.add_argument("--spec", required=True)

    p = command("fuzz", "randomized cross-check of all tiers and minimizers")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--cases", type=int, default=100)
    p.add_argument("--max-states", type=int, default=10)
    p.add_argument("--max-alphabet", type=int, default=3)
    p.add_argument("--word-length", type=int, default=6)
    p.add_argument("--engines", default="seq,mt,ooc", help="comma-separated subset of seq,mt,ooc")
    p.add_argument("--workers", type=int, default=4)
    return parser


def _tmpdir(args):
    return args.tmpdir or "tmp"


def _ooc_config(args):
    return OocConfig.from_env(
        workers=args.workers, buffer_bytes=args.buffer_bytes, tmpdir=_tmpdir(args),
        checkpoint=None if args.checkpoint is None else args.checkpoint == "on",
    )


def _workdir(args, name):
    return Path(args.workdir) if args.workdir else Path(_tmpdir(args)) / name


def _load(path, want=None):
    try:
        a = read_automaton(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    if want == "dfa" and not isinstance(a, Dfa):
        raise InputError(f"{path} holds an NFA; this command needs a DFA")
    return a


def _save(a, path):
    try:
        write_automaton(a, path)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror or exc}") from None


def cmd_tpn_gen(args):
    spec = NetworkSpec(args.family, args.depth, args.buffer)
    tpn = build_network(spec)
    bound = check_alphabet_bound(spec, tpn)
    nfa = build_achievable_nfa(tpn, args.max_rank or bound)
    _save(nfa, args.out)
    return {"family": args.family, "buffer": args.buffer, "depth": args.depth,
            "alphabet": nfa.alphabet_size, "output_states": nfa.num_states,
            "transitions": nfa.num_transitions}


def cmd_tpn_check(args):
    if args.n < 1:
        raise InputError("--n must be >= 1")
    depth = args.depth if args.depth is not None else (args.n if args.family == "stack" else None)
    if depth is None:
        raise InputError("--depth is required for this family")
    tpn = build_network(NetworkSpec(args.family, depth, args.buffer))
    rows = [(n, count_achievable(tpn, n), catalan(n)) for n in range(1, args.n + 1)]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["n", "achievable_count", "catalan_like_reference"])
        w.writerows(rows)
    finally:
        if args.out:
            out.close()
    return {"rows": [list(r) for r in rows]}


def cmd_determinize(args):
    nfa = _load(args.input)
    if isinstance(nfa, Dfa):
        nfa = nfa.to_nfa()
    t0 = time.perf_counter()
    report = {"engine": args.engine, "input_states": nfa.num_states}
    if args.engine == "seq":
        dfa, profile = determinize(nfa, args.policy, args.max_states)
    elif args.engine == "mt":
        dfa, profile = determinize_mt(nfa, args.workers, args.partitions, args.policy, args.max_states)
    else:
        workdir = _workdir(args, "ooc-determinize")
        run = ooc_determinize(nfa, _ooc_config(args), args.policy, args.max_states,
                              workdir=workdir, resume=args.resume)
        dfa, profile = run.load(), run.report.profile
        report["ooc"] = run.report.to_dict()
        shutil.rmtree(workdir, ignore_errors=True)
    report.update(output_states=dfa.num_states, levels=len(profile), profile=profile,
                  wall_seconds=time.perf_counter() - t0)
    _save(dfa, args.out)
    if args.profile_csv:
        with open(args.profile_csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["level", "new_states"])
            w.writerows(enumerate(profile))
    return report


def cmd_minimize(args):
    dfa = _load(args.input, "dfa")
    if args.engine != "seq" and args.algo != "forward":
        raise InputError(f"engine {args.engine} supports --algo forward only")
    t0 = time.perf_counter()
    report = {"algo": args.algo, "engine": args.engine, "input_states": dfa.num_states}
    sweeps = None
    if args.engine == "mt":
        out, sweeps = minimize_forward_mt(dfa, args.workers, return_sweeps=True, trim=args.trim)
    elif args.engine == "ooc":
        workdir = _workdir(args, "ooc-minimize")
        out, rep = ooc_minimize(dfa, _ooc_config(args), workdir=workdir, resume=args.resume,
                                trim=args.trim, return_report=True)
        sweeps = rep.sweeps
        report["ooc"] = rep.to_dict()
        shutil.rmtree(workdir, ignore_errors=True)
    elif args.algo == "forward":
        out, sweeps = minimize_forward(dfa, return_sweeps=True, trim=args.trim)
    else:
        out = MINIMIZERS[args.algo](dfa, trim=args.trim)
    report.update(output_states=out.num_states, sweeps=sweeps,
                  wall_seconds=time.perf_counter() - t0)
    _save(out, args.out)
    return report


def _unary(fn, want=None):
    def run(args):
        a = _load(args.input, want)
        out = fn(a)
        _save(out, args.out)
        return {"input_states": a.num_states, "output_states": out.num_states}
    return run


def cmd_intersect(args):
    a, b = (_load(p, "dfa") for p in args.input)
    out = intersect(a, b)
    _save(out, args.out)
    return {"input_states": [a.num_states, b.num_states], "output_states": out.num_states}


def cmd_pipeline(args):
    spec = PipelineSpec.load(args.spec)
    if spec.tmpdir is None and args.tmpdir:
        spec.tmpdir = Path(args.tmpdir)
    return run_pipeline(spec)


def cmd_fuzz(args):
    engines = tuple(e for e in args.engines.split(",") if e)
    for e in engines:
        if e not in ENGINES:
            raise InputError(f"unknown engine {e!r}")
    limits = FuzzLimits(args.max_states, args.max_alphabet, args.word_length)
    ooc_cfg = None
    if "ooc" in engines:
        ooc_cfg = OocConfig(workers=args.workers, buffer_bytes=64 << 10, tmpdir=_tmpdir(args))
        Path(ooc_cfg.tmpdir).mkdir(parents=True, exist_ok=True)
    verdict = fuzz_equivalence(args.seed, args.cases, limits, engines=engines,
                               workers=args.workers, ooc_config=ooc_cfg)
    return verdict.to_dict()


COMMANDS = {
    "tpn-gen": cmd_tpn_gen,
    "tpn-check": cmd_tpn_check,
    "determinize": cmd_determinize,
    "minimize": cmd_minimize,
    "complement": _unary(dfa_complement, "dfa"),
    "reverse": _unary(reverse),
    "intersect": cmd_intersect,
    "pipeline": cmd_pipeline,
    "fuzz": cmd_fuzz,
}


def _summary(command, report):
    if command == "pipeline":
        lines = [f"pipeline: {len(report['stages'])} stage(s), {report['status']}"]
        for st in report["stages"]:
            if st["op"] == "stats":
                s = st["stats"]
                lines.append(f"  {st['stage']}: stats {s['kind']} states={s['states']}"
                             f" alphabet={s['alphabet']} transitions={s['transitions']}")
            else:
                lines.append(f"  {st['stage']}: {st['op']} -> {st['output_states']} states"
                             f" in {st['wall_seconds']:.3f}s")
        return "\n".join(lines)
    if command == "fuzz":
        status = "pass" if report["passed"] else f"{len(report['failures'])} failure(s)"
        return f"fuzz seed={report['seed']} cases={report['cases']}: {status}"
    if "output_states" in report:
        extra = ""
        if report.get("sweeps") is not None:
            extra = f", {report['sweeps']} sweeps"
        elif report.get("levels"):
            extra = f", {report['levels']} levels"
        return f"{command}: {report.get('input_states', '-')} -> {report['output_states']} states{extra}"
    return None


def _write_report(path, report):
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.quiet:
        logging.getLogger().setLevel(logging.ERROR)
    try:
        report = COMMANDS[args.command](args)
        if args.command == "fuzz" and not report["passed"]:
            for f in report["failures"]:
                print(f"case {f['case']} {f['check']}: {f['detail']}\n{f['automaton']}", file=sys.stderr)
            raise InvariantError(f"fuzz found {len(report['failures'])} failure(s)")
    except FsaError as exc:
        print(f"fsakit {args.command}: {exc}", file=sys.stderr)
        if args.report_json:
            partial = getattr(exc, "report", None) or {}
            if args.command == "fuzz":
                partial = report
            _write_report(args.report_json, {**partial, "status": "failed", "error": str(exc)})
        return exc.exit_code
    except MemoryError:
        print(f"fsakit {args.command}: out of memory", file=sys.stderr)
        return 3
    if args.report_json:
        _write_report(args.report_json, report)
    if not args.quiet:
        line = _summary(args.command, report)
        if line:
            print(line, file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
