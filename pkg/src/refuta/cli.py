"""Command-line driver: parse, encode, run the pipeline, solve, and print
the decoded model.

Exit codes are a stable machine contract: 10 SAT, 20 UNSAT (up to bounds),
30 UNKNOWN, 1 usage/parse/type errors, 40 a decoded model failed the oracle
re-check requested by --check.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .depfront import encode_problem
from .errors import RefutaError
from .fmf import CardinalitySchedule, Verdict, check_model, solve
from .models import Model
from .parser import parse_dep_problem, parse_problem
from .pipeline import PipelineConfig, decode_chain, run_pipeline
from .printer import print_model, print_problem
from .problems import PredDef, Problem, RecDef, ValDecl
from .smtlib import emit, parse_smt_model
from .terms import TYPE
from .typecheck import infer

EXIT_SAT = 10
EXIT_UNSAT = 20
EXIT_UNKNOWN = 30
EXIT_ERROR = 1
EXIT_CHECK_FAILED = 40

SOLVER_ENV = "REFUTA_SOLVER"


@dataclass
class RunConfig:
    input_path: str
    frontend: str = "auto"  # "core" | "dependent" | "auto"
    backend: str = "builtin"  # "builtin" | "smtlib:<solver-cmd>"
    card_max: int = 8
    depth_max: int = 5
    int_bound: int = 1000
    timeout_ms: Optional[int] = None
    unroll_depth: int = 8
    specialize: bool = False
    dump_phases: Optional[str] = None
    keep_smt: Optional[str] = None
    check: bool = False
    fmt: str = "human"


def build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="refuta",
        description="counterexample generator: finds finite models of the "
        "negated conjecture given as the problem's goal")
    ap.add_argument("input", help="problem file (.nun core, .dnun dependent)")
    ap.add_argument("--frontend", choices=["core", "dependent"], default=None,
                    help="override the frontend inferred from the extension")
    ap.add_argument("--backend", default="builtin",
                    help="'builtin' or 'smtlib:<solver command>' "
                    f"(default solver from ${SOLVER_ENV})")
    ap.add_argument("--card-max", type=int, default=8,
                    help="max carrier size for abstract types (default 8)")
    ap.add_argument("--depth-max", type=int, default=5,
                    help="datatype unfolding depth bound (default 5)")
    ap.add_argument("--int-bound", type=int, default=1000,
                    help="integers live in [-B, B] (default 1000)")
    ap.add_argument("--timeout-ms", type=int, default=None)
    ap.add_argument("--unroll-depth", type=int, default=8,
                    help="fuel depth for unrolled predicates (default 8)")
    ap.add_argument("--specialize", action="store_true",
                    help="enable specialization on static arguments")
    ap.add_argument("--dump-phases", metavar="DIR", default=None,
                    help="write each phase's output as NN-phasename.nun")
    ap.add_argument("--keep-smt", metavar="PATH", default=None,
                    help="keep the emitted SMT-LIB script (and mangling "
                    "sidecar) at PATH")
    ap.add_argument("--check", action="store_true",
                    help="re-verify the decoded model against the original "
                    "problem with the reference evaluator")
    ap.add_argument("--format", dest="fmt", choices=["human", "machine"],
                    default="human")
    return ap


def config_from_args(args) -> RunConfig:
    return RunConfig(
        input_path=args.input,
        frontend=args.frontend or "auto",
        backend=args.backend,
        card_max=args.card_max,
        depth_max=args.depth_max,
        int_bound=args.int_bound,
        timeout_ms=args.timeout_ms,
        unroll_depth=args.unroll_depth,
        specialize=args.specialize,
        dump_phases=args.dump_phases,
        keep_smt=args.keep_smt,
        check=args.check,
        fmt=args.fmt,
    )


def model_symbol_order(p: Problem) -> list[str]:
    order = []
    for stmt in p.statements:
        match stmt:
            case ValDecl(name, ty) if ty != TYPE:
                order.append(name)
            case PredDef(defs) | RecDef(defs):
                order.extend(d.name for d in defs)
            case _:
                pass
    return order


def _load(cfg: RunConfig) -> tuple[Problem, Problem]:
    """Returns (surface problem for checking, typed core problem)."""
    path = Path(cfg.input_path)
    text = path.read_text(encoding="utf-8")
    frontend = cfg.frontend
    if frontend == "auto":
        frontend = "dependent" if path.suffix == ".dnun" else "core"
    if frontend == "dependent":
        dep = parse_dep_problem(text, str(path))
        core = encode_problem(dep)
    else:
        core = parse_problem(text, str(path))
    typed = infer(core)
    return typed, typed


def _external_solve(cfg: RunConfig, backend_problem: Problem,
                    solver_cmd: str) -> tuple[Verdict, list[str]]:
    script = emit(backend_problem)
    if cfg.keep_smt:
        script_path = Path(cfg.keep_smt)
        script_path.write_text(script.text(), encoding="utf-8")
        sidecar = script_path.with_suffix(script_path.suffix + ".mangling")
        sidecar.write_text(
            "".join(f"{k}\t{v}\n" for k, v in sorted(script.mangler.table().items())),
            encoding="utf-8")
    else:
        tmp = tempfile.NamedTemporaryFile("w", suffix=".smt2", delete=False)
        tmp.write(script.text())
        tmp.close()
        script_path = Path(tmp.name)
    cmd = solver_cmd.split() + [str(script_path)]
    try:
        proc = subprocess.run(
            cmd, capture_output=True, text=True,
            timeout=(cfg.timeout_ms / 1000.0) if cfg.timeout_ms else None)
    except FileNotFoundError:
        return Verdict("UNKNOWN", reason=f"solver not found: {cmd[0]}"), []
    except subprocess.TimeoutExpired:
        return Verdict("UNKNOWN", reason="external solver timeout"), []
    out = proc.stdout.strip()
    first, _, rest = out.partition("\n")
    first = first.strip()
    if first == "unsat":
        return Verdict("UNSAT_UP_TO", reason="external solver reported unsat"), []
    if first != "sat":
        return Verdict("UNKNOWN",
                       reason=f"unparseable solver response: {out[:200]!r}"), []
    model, warnings = parse_smt_model(backend_problem, rest, script.mangler)
    if not check_model(backend_problem, model):
        return Verdict("UNKNOWN",
                       reason="external model failed the reference check"), warnings
    return Verdict("SAT", model=model,
                   bounds="external solver"), warnings


def run(cfg: RunConfig) -> int:
    try:
        surface, typed = _load(cfg)
    except RefutaError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR

    pipe_cfg = PipelineConfig(specialize=cfg.specialize,
                              unroll_depth=cfg.unroll_depth)
    dump = None
    if cfg.dump_phases:
        dump_dir = Path(cfg.dump_phases)
        dump_dir.mkdir(parents=True, exist_ok=True)

        def dump(i, name, problem):
            (dump_dir / f"{i:02d}-{name}.nun").write_text(
                print_problem(problem), encoding="utf-8")

    try:
        backend_problem, transforms = run_pipeline(typed, pipe_cfg, dump=dump)
    except RefutaError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR

    warnings: list[str] = []
    for t in transforms:
        warnings.extend(t.warnings)

    if cfg.backend == "builtin":
        sched = CardinalitySchedule(max_card=cfg.card_max, depth=cfg.depth_max,
                                    int_bound=cfg.int_bound,
                                    timeout_ms=cfg.timeout_ms)

        def gate(backend_model: Model) -> bool:
            decoded = decode_chain(transforms, backend_model)
            return check_model(surface, decoded)

        verdict = solve(backend_problem, sched, gate=gate)
    else:
        solver_cmd = cfg.backend
        if solver_cmd.startswith("smtlib"):
            _, _, solver_cmd = cfg.backend.partition(":")
        if not solver_cmd:
            solver_cmd = os.environ.get(SOLVER_ENV, "")
        if not solver_cmd:
            print(f"error: no external solver configured (set {SOLVER_ENV} or "
                  "use --backend smtlib:<cmd>)", file=sys.stderr)
            return EXIT_ERROR
        verdict, smt_warnings = _external_solve(cfg, backend_problem, solver_cmd)
        warnings.extend(smt_warnings)

    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)

    if verdict.kind == "UNSAT_UP_TO" and surface.has_copred():
        verdict = Verdict(
            "UNKNOWN",
            reason="completeness: coinductive predicates are approximated by "
            "bounded unfolding, so exhausting the schedule does not refute "
            "greatest-fixpoint models", bounds=verdict.bounds)

    decoded = None
    verified = False
    if verdict.is_sat:
        decoded = decode_chain(transforms, verdict.model)
        if cfg.check:
            verified = check_model(surface, decoded)
            if not verified:
                print("error: decoded model failed the oracle re-check "
                      "(decoder bug)", file=sys.stderr)
                return EXIT_CHECK_FAILED

    _report(cfg, surface, verdict, decoded, verified)
    if verdict.is_sat:
        return EXIT_SAT
    if verdict.kind == "UNSAT_UP_TO":
        return EXIT_UNSAT
    return EXIT_UNKNOWN


def _report(cfg: RunConfig, surface: Problem, verdict: Verdict,
            decoded: Model | None, verified: bool):
    order = model_symbol_order(surface)
    if cfg.fmt == "machine":
        print(f"verdict: {verdict.kind}")
        if verdict.bounds:
            print(f"bounds: {verdict.bounds}")
        if verdict.reason:
            print(f"reason: {verdict.reason}")
        if cfg.check and verdict.is_sat:
            print(f"verified: {'yes' if verified else 'no'}")
        if decoded is not None:
            print("model:")
            for line in print_model(decoded, order).splitlines():
                print(f"  {line}")
        return
    if verdict.is_sat:
        tag = " (verified)" if cfg.check and verified else ""
        print(f"SAT{tag}")
        print(print_model(decoded, order), end="")
    elif verdict.kind == "UNSAT_UP_TO":
        print(f"UNSAT (up to bounds: {verdict.bounds})")
    else:
        print(f"UNKNOWN ({verdict.reason})")


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        return run(config_from_args(args))
    except RefutaError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
