"""Scenario pipeline: build basis, transform data, solve, classify, fit, emit."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analysis import fit_envelope
from .errors import FitError, NonContractionError, UnsupportedError
from .nonlinear import instantaneous_forcing, picard_solve, smallness_check, z_norm_terms
from .oracle import relative_hnorm_discrepancy, rk4_modes
from .propagator import (
    TRAJECTORY_COLUMNS,
    classify_decay,
    fitted_constant,
    solve_linear,
    trajectory_rows,
    write_trajectory_csv,
)
from .scenario import Scenario

__all__ = ["RunResult", "run", "compare_oracle", "OracleReport", "dump_json"]

LINEAR_ORACLE_TOL = 1e-6
NONLINEAR_ORACLE_TOL = 1e-5


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Path):
        return obj.as_posix()
    return obj


def dump_json(obj) -> str:
    """Deterministic JSON (sorted keys, shortest round-trip floats, no NaN)."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False, ensure_ascii=False) + "\n"


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _rows_text(columns, rows, fmt):
    if fmt == "json":
        return dump_json({"columns": list(columns), "rows": [list(r) for r in rows]})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow(["" if v is None else repr(float(v)) if isinstance(v, (float, np.floating)) else v
                    for v in row])
    return buf.getvalue()


@dataclass
class RunResult:
    manifest: dict
    trajectory: object
    picard: Optional[object] = None
    files: dict = field(default_factory=dict)


def _fit(sc: Scenario, traj):
    quantity = sc.fit.get("norm", "z")
    if quantity == "h":
        values = traj.h_norms()
    else:
        values = z_norm_terms(traj, 1)
    try:
        fit = fit_envelope(traj.times, values, tail=float(sc.fit.get("tail", 0.6)))
        out = fit.to_dict()
    except FitError as exc:
        out = {"error": str(exc)}
    out["norm"] = "h_norm" if quantity == "h" else "u+ut+L^1/2u"
    return out


def run(sc: Scenario, out_dir=None, fmt: str = "csv", threads: int = 1) -> RunResult:
    """Execute the scenario pipeline and (optionally) write its artifacts.

    Artifacts are ``trajectory.csv`` (or ``.json``), ``iterations.csv`` for
    nonlinear problems and ``manifest.json`` listing the others with their
    SHA-256 digests.  Output is byte-identical for identical inputs.
    """
    sc.validate()
    basis = sc.basis()
    params = sc.params()
    nl = sc.nl()
    times = sc.times()
    u0, u1 = sc.initial_data()
    solver = sc.solver
    threshold = float(solver.get("smallness_threshold", 1e-2))

    picard = None
    if nl is None:
        traj = solve_linear(basis, params, u0, u1, times)
        envelope = classify_decay(params, basis.bottom)
        smallness = smallness_check(basis, u0, u1, 1, threshold)
    else:
        picard = picard_solve(basis, params, nl, u0, u1, times, tol=solver.get("tol"),
                              max_iter=int(solver.get("max_iter", 50)), threshold=threshold,
                              keep_iterates=False, threads=threads)
        traj = picard.final
        envelope = picard.envelope
        smallness = picard.smallness

    hn = traj.h_norms()
    constant = fitted_constant(hn, envelope, times)
    rows = trajectory_rows(traj, envelope, constant)

    manifest = {
        "specwave_version": __version__,
        "scenario": sc.describe(),
        "grid": {"t0": float(times[0]), "t_end": float(times[-1]), "samples": int(times.size)},
        "tolerances": {"picard_tol": picard.tol if picard else None,
                       "max_iter": int(solver.get("max_iter", 50)),
                       "smallness_threshold": threshold},
        "smallness": smallness.to_dict(),
        "envelope": {"gamma": envelope.gamma, "q": envelope.q, "regime": envelope.regime.value,
                     "nonlinear": envelope.nonlinear, "fitted_constant": constant},
        "fit": _fit(sc, traj),
        "spectral_truncation": {"modes": basis.size, "infimum_exact": bool(basis.infimum_exact)},
    }
    if picard is not None:
        manifest["picard"] = {
            "converged": picard.converged,
            "iterations": picard.iterations,
            "increments": picard.increments,
            "contraction_ratios": picard.contraction_ratios,
            "max_contraction_ratio": picard.max_ratio,
            "fitted_L": picard.fitted_L,
        }
        manifest["converged"] = picard.converged
    else:
        manifest["converged"] = True

    texts = {}
    traj_name = "trajectory.json" if fmt == "json" else "trajectory.csv"
    texts[traj_name] = (write_trajectory_csv(rows) if fmt == "csv"
                        else _rows_text(TRAJECTORY_COLUMNS, rows, "json"))
    if picard is not None:
        it_rows = []
        for k in range(picard.iterations):
            ratio = picard.contraction_ratios[k - 1] if k >= 1 else None
            it_rows.append((k + 1, picard.z_norms[k + 1], picard.increments[k], picard.z_increments[k], ratio))
        name = "iterations.json" if fmt == "json" else "iterations.csv"
        texts[name] = _rows_text(("iteration", "z_norm", "increment", "z_increment", "contraction_ratio"),
                                 it_rows, fmt)
    manifest["artifacts"] = [{"file": k, "sha256": _sha256(v)} for k, v in sorted(texts.items())]

    result = RunResult(manifest, traj, picard)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for k, v in texts.items():
            (out / k).write_text(v)
            result.files[k] = out / k
        (out / "manifest.json").write_text(dump_json(manifest))
        result.files["manifest.json"] = out / "manifest.json"
    return result


@dataclass
class OracleReport:
    status: str  # "pass", "fail" or "inconclusive"
    discrepancy: float
    tolerance: float
    oracle_step: float
    oracle_self_error: float
    problem_class: str

    @property
    def passed(self):
        return self.status == "pass"

    def to_dict(self):
        return {"status": self.status, "discrepancy": self.discrepancy, "tolerance": self.tolerance,
                "oracle_step": self.oracle_step, "oracle_self_error": self.oracle_self_error,
                "problem_class": self.problem_class, "pass": self.passed}


def compare_oracle(sc: Scenario, threads: int = 1) -> OracleReport:
    """Sup-in-time relative ``h_norm`` gap between the solver and RK4.

    The oracle step is halved (from ``oracle.step``, default ``1e-3``, down
    to ``oracle.min_step``, default ``1.25e-4``; never above the output
    spacing) until two successive RK4 runs agree to a tenth of the
    tolerance; if the floor is reached first the status is
    ``"inconclusive"``.
    """
    sc.validate()
    basis, params, nl, times = sc.basis(), sc.params(), sc.nl(), sc.times()
    u0, u1 = sc.initial_data()
    tol = LINEAR_ORACLE_TOL if nl is None else NONLINEAR_ORACLE_TOL
    if nl is None:
        sol = solve_linear(basis, params, u0, u1, times).u_hat
    else:
        sol = picard_solve(basis, params, nl, u0, u1, times, tol=sc.solver.get("tol"),
                           max_iter=int(sc.solver.get("max_iter", 50)), keep_iterates=False,
                           threads=threads).final.u_hat
    try:
        forcing = instantaneous_forcing(nl, basis, params)
    except UnsupportedError:
        return OracleReport("inconclusive", math.nan, tol, math.nan, math.nan, sc.problem)
    # RK4 never steps across an output interval, so a larger step would not be refined
    step = min(float(sc.oracle.get("step", 1e-3)), float(np.min(np.diff(times))))
    floor = float(sc.oracle.get("min_step", 1.25e-4))
    lam = basis.eigenvalues
    prev, _ = rk4_modes(lam, params.b, params.m, u0, u1, times, step, forcing)
    self_err = math.inf
    while True:
        nxt_step = step / 2
        if nxt_step < floor * (1 - 1e-12):
            break
        cur, _ = rk4_modes(lam, params.b, params.m, u0, u1, times, nxt_step, forcing)
        self_err = relative_hnorm_discrepancy(prev, cur)
        prev, step = cur, nxt_step
        if self_err <= tol / 10:
            break
    if not self_err <= tol / 10:
        return OracleReport("inconclusive", relative_hnorm_discrepancy(sol, prev), tol, step,
                            self_err, sc.problem)
    disc = relative_hnorm_discrepancy(sol, prev)
    return OracleReport("pass" if disc <= tol else "fail", disc, tol, step, self_err, sc.problem)
