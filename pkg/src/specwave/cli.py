"""Command-line entry point.

Exit codes: 0 ok, 1 oracle comparison failed, 2 validation error,
3 Picard divergence, 4 oracle inconclusive.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .analysis import GNQuery, convolution_bound_probe, fit_envelope, gn_admissible
from .errors import (
    AssumptionError,
    FitError,
    NonContractionError,
    SpecwaveError,
    UnsupportedError,
    ValidationError,
)
from .propagator import DampingParams, classify_decay
from .runner import compare_oracle, dump_json, run
from .scenario import build_basis, load_scenario
from .spectral import save_basis

EXIT_OK, EXIT_FAIL, EXIT_VALIDATION, EXIT_DIVERGENCE, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("SPECWAVE_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _emit(obj, out=None, name=None):
    text = dump_json(obj)
    if out is not None and name is not None:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        (path / name).write_text(text)
    sys.stdout.write(text)


def _error(exc, code, extra=None):
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, AssumptionError):
        doc["assumption"] = exc.assumption
    if isinstance(exc, ValidationError) and exc.issues:
        doc["issues"] = exc.issues
    if extra:
        doc.update(extra)
    sys.stdout.write(dump_json(doc))
    return code


def _basis_from_args(args):
    if args.scenario:
        sc = load_scenario(args.scenario, seed=args.seed)
        return sc.basis(), sc
    spec = {"kind": args.basis, "dimension": args.dimension}
    if args.max_degree is not None:
        spec["max_degree"] = args.max_degree
    if args.quadrature is not None:
        spec["quadrature"] = args.quadrature
    if args.max_frequency is not None:
        spec["max_frequency"] = args.max_frequency
    if args.grid is not None:
        spec["grid"] = args.grid
    return build_basis(spec), None


# ------------------------------------------------------------------ commands


def cmd_solve(args):
    sc = load_scenario(args.scenario, seed=args.seed)
    try:
        res = run(sc, out_dir=args.out, fmt=args.format, threads=_threads(args))
    except NonContractionError as exc:
        return _error(exc, EXIT_DIVERGENCE, {
            "contraction_ratios": exc.ratios, "increments": exc.increments})
    sys.stdout.write(dump_json(res.manifest))
    return EXIT_OK


def cmd_classify(args):
    env = classify_decay(DampingParams(args.b, args.m), args.lambda0, args.alpha, args.beta,
                         nonlinear=args.nonlinear)
    doc = {"gamma": env.gamma, "q": env.q, "regime": env.regime.value, "nonlinear": env.nonlinear,
           "data_orders": list(env.data_orders)}
    if args.format == "json":
        sys.stdout.write(dump_json(doc))
    else:
        print(f"{env.regime.value}: (1+t)^{env.q:g} exp(-{env.gamma!r} t)")
    return EXIT_OK


def cmd_gn_check(args):
    p = math.inf if args.p.lower() in ("inf", "infinity") else float(args.p)
    q = GNQuery(args.family, args.n, p)
    verdict = gn_admissible(q)
    if args.format == "json":
        sys.stdout.write(dump_json({"family": q.family.value, "n": q.n, "p": p,
                                    "admissible": verdict.admissible, "theta": verdict.theta,
                                    "critical_index": verdict.critical_index,
                                    "exponent": verdict.exponent_name}))
    else:
        word = "admissible" if verdict.admissible else "not admissible"
        theta = "n/a" if verdict.theta is None else repr(verdict.theta)
        print(f"{q.family.value} n={q.n} p={args.p}: {word}; theta={theta} [{verdict.exponent_name}]")
    return EXIT_OK


def _read_series(path, column):
    path = Path(path)
    if path.suffix == ".json":
        doc = json.loads(path.read_text())
        cols = doc["columns"]
        rows = doc["rows"]
        t = [r[cols.index("t")] for r in rows]
        v = [r[cols.index(column)] for r in rows]
        return np.asarray(t, float), np.asarray(v, float)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "t" not in reader.fieldnames or column not in reader.fieldnames:
            raise ValidationError("input lacks required columns", [f"need 't' and {column!r}"])
        rows = list(reader)
    return (np.array([float(r["t"]) for r in rows]), np.array([float(r[column]) for r in rows]))


def cmd_fit_envelope(args):
    t, v = _read_series(args.input, args.column)
    try:
        fit = fit_envelope(t, v, tail=args.tail)
    except FitError as exc:
        return _error(exc, EXIT_VALIDATION)
    _emit(fit.to_dict(), args.out, "fit.json")
    return EXIT_OK


def cmd_probe_conv(args):
    basis, sc = _basis_from_args(args)
    seed = args.seed if args.seed is not None else (sc.seed if sc else 0)
    res = convolution_bound_probe(basis, args.trials, seed)
    _emit(res.to_dict(), args.out, "probe.json")
    return EXIT_OK


def cmd_compare_oracle(args):
    sc = load_scenario(args.scenario, seed=args.seed)
    try:
        rep = compare_oracle(sc, threads=_threads(args))
    except NonContractionError as exc:
        return _error(exc, EXIT_DIVERGENCE, {"contraction_ratios": exc.ratios})
    _emit(rep.to_dict(), args.out, "oracle.json")
    if rep.status == "inconclusive":
        return EXIT_INCONCLUSIVE
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_export_basis(args):
    basis, _ = _basis_from_args(args)
    out = Path(args.out) if args.out else None
    if out is None:
        from .spectral import basis_to_dict
        sys.stdout.write(json.dumps(basis_to_dict(basis)) + "\n")
        return EXIT_OK
    if out.suffix != ".json":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "basis.json"
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
    save_basis(basis, out)
    print(out)
    return EXIT_OK


# -------------------------------------------------------------------- parser


def _add_common(p, scenario_required=False):
    p.add_argument("--scenario", required=scenario_required,
                   help="scenario TOML path, or builtin:<name> for a bundled one")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $SPECWAVE_THREADS or 1)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _add_basis_flags(p):
    p.add_argument("--basis", default="hermite", help="hermite, torus or explicit:<path>")
    p.add_argument("--dimension", type=int, default=1)
    p.add_argument("--max-degree", type=int, default=None)
    p.add_argument("--quadrature", type=int, default=None)
    p.add_argument("--max-frequency", type=int, default=None)
    p.add_argument("--grid", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specwave", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run a scenario and write trajectory and manifest")
    _add_common(p, scenario_required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("classify", help="predicted decay envelope")
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--m", type=float, default=0.0)
    p.add_argument("--lambda0", type=float, required=True)
    p.add_argument("--alpha", type=int, default=0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--nonlinear", action="store_true")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("gn-check", help="Gagliardo-Nirenberg admissibility of an index")
    p.add_argument("--family", required=True,
                   help="HarmonicOscillator, CompactManifoldLaplacian or TwistedLaplacian")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", required=True, help="index p >= 1 (or 'inf')")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_gn_check)

    p = sub.add_parser("fit-envelope", help="fit C (1+t)^q e^{-gamma t} to a trajectory file")
    p.add_argument("--input", required=True, help="trajectory CSV or JSON")
    p.add_argument("--column", default="h_norm")
    p.add_argument("--tail", type=float, default=0.6)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_fit_envelope)

    p = sub.add_parser("probe-conv", help="empirical L1 convolution bound")
    _add_common(p)
    _add_basis_flags(p)
    p.add_argument("--trials", type=int, default=1000)
    p.set_defaults(func=cmd_probe_conv)

    p = sub.add_parser("compare-oracle", help="compare the solver against RK4 method of lines")
    _add_common(p, scenario_required=True)
    p.set_defaults(func=cmd_compare_oracle)

    p = sub.add_parser("export-basis", help="write a basis as JSON")
    _add_common(p)
    _add_basis_flags(p)
    p.set_defaults(func=cmd_export_basis)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NonContractionError as exc:
        return _error(exc, EXIT_DIVERGENCE, {"contraction_ratios": exc.ratios})
    except (ValidationError, UnsupportedError) as exc:
        return _error(exc, EXIT_VALIDATION)
    except SpecwaveError as exc:
        return _error(exc, EXIT_VALIDATION)


if __name__ == "__main__":
    sys.exit(main())
