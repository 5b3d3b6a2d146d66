"""Scenario files: parsing, validation and the objects they describe.

A scenario is a TOML document with the tables ``[basis]``, ``[params]``,
``[problem]``, ``[nonlinearity]``, ``[initial]``, ``[time]``, ``[solver]``,
``[oracle]`` and ``[fit]``; see ``schemas/scenario.schema.json`` for the
field list and the bundled ``scenarios/*.toml`` for worked examples.
"""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .bases import HermiteSpec, TorusSpec, build_harmonic_oscillator, build_torus
from .errors import AssumptionError, ValidationError
from .nonlinear import data_sigma, make_nonlinearity, smallness_check
from .propagator import DampingParams
from .spectral import SpectralBasis, forward_transform, load_basis

__all__ = ["Scenario", "load_scenario", "resolve_scenario_path", "build_basis", "PROBLEM_CLASSES"]

PROBLEM_CLASSES = ("linear", "semilinear", "general", "higher-order")

_NL_CLASS = {"SemilinearPower": "semilinear", "GeneralFirstOrder": "general", "HigherOrder": "higher-order"}


def build_basis(spec: dict, base_dir: Optional[Path] = None) -> SpectralBasis:
    """Construct a basis from a ``[basis]`` table.

    ``kind`` is ``"hermite"``, ``"torus"`` or ``"explicit:<path>"`` (the
    path may also be given as ``path``).
    """
    kind = str(spec.get("kind", "hermite"))
    if kind == "hermite":
        return build_harmonic_oscillator(HermiteSpec(
            dimension=int(spec.get("dimension", 1)),
            max_degree=int(spec.get("max_degree", 31)),
            quadrature=spec.get("quadrature"),
            truncation=spec.get("truncation", "box"),
        ))
    if kind == "torus":
        return build_torus(TorusSpec(
            dimension=int(spec.get("dimension", 1)),
            max_frequency=int(spec.get("max_frequency", 8)),
            grid=spec.get("grid"),
        ))
    if kind.startswith("explicit"):
        path = kind.partition(":")[2] or spec.get("path")
        if not path:
            raise ValidationError("explicit basis needs a path", ["basis.kind = 'explicit:<path>'"])
        path = Path(path)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        if not path.exists():
            raise ValidationError("explicit basis file not found", [str(path)])
        return load_basis(path, tol=float(spec.get("tolerance", 1e-8)))
    raise ValidationError(f"unknown basis kind {kind!r}", ["expected hermite, torus or explicit:<path>"])


def resolve_scenario_path(name) -> Path:
    """A filesystem path, or ``builtin:<name>`` for a bundled scenario."""
    name = str(name)
    if name.startswith("builtin:"):
        stem = name.partition(":")[2]
        ref = resources.files("specwave") / "scenarios" / f"{stem}.toml"
        if not ref.is_file():
            raise ValidationError(f"no bundled scenario named {stem!r}")
        return Path(str(ref))
    return Path(name)


@dataclass
class Scenario:
    basis_spec: dict
    b: float
    m: float = 0.0
    problem: str = "linear"
    nonlinearity: dict = field(default_factory=dict)
    initial: dict = field(default_factory=lambda: {"profile": "zero"})
    time: dict = field(default_factory=lambda: {"t_end": 10.0, "dt": 0.01})
    solver: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)
    fit: dict = field(default_factory=dict)
    seed: int = 0
    name: str = "scenario"
    base_dir: Optional[Path] = None
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, doc: dict, name: str = "scenario", base_dir=None) -> "Scenario":
        params = doc.get("params", {})
        problem = doc.get("problem", {})
        if isinstance(problem, str):
            problem = {"class": problem}
        return cls(
            basis_spec=dict(doc.get("basis", {"kind": "hermite"})),
            b=params.get("b", 1.0),
            m=params.get("m", 0.0),
            problem=problem.get("class", "linear"),
            nonlinearity=dict(doc.get("nonlinearity", {})),
            initial=dict(doc.get("initial", {"profile": "zero"})),
            time=dict(doc.get("time", {"t_end": 10.0, "dt": 0.01})),
            solver=dict(doc.get("solver", {})),
            oracle=dict(doc.get("oracle", {})),
            fit=dict(doc.get("fit", {})),
            seed=int(doc.get("seed", doc.get("initial", {}).get("seed", 0))),
            name=str(doc.get("name", name)),
            base_dir=base_dir,
            raw=doc,
        )

    # -- derived objects ---------------------------------------------------

    def basis(self) -> SpectralBasis:
        if not hasattr(self, "_basis"):
            self._basis = build_basis(self.basis_spec, self.base_dir)
        return self._basis

    def params(self) -> DampingParams:
        return DampingParams(float(self.b), float(self.m))

    def nl(self):
        if self.problem == "linear":
            return None
        return make_nonlinearity(self.nonlinearity, self.basis())

    def times(self) -> np.ndarray:
        if "times" in self.time:
            return np.asarray(self.time["times"], dtype=float)
        t_end = float(self.time.get("t_end", 10.0))
        dt = float(self.time.get("dt", 0.01))
        n = int(round(t_end / dt))
        return np.linspace(0.0, n * dt, n + 1)

    def sigma(self) -> int:
        return data_sigma(self.nl())

    def initial_data(self):
        """Initial coefficients ``(u0_hat, u1_hat)``; deterministic given ``seed``."""
        basis = self.basis()
        spec = self.initial
        profile = spec.get("profile", "zero")
        N = basis.size
        lam = basis.eigenvalues
        sigma = self.sigma()
        if profile == "zero":
            u0, u1 = np.zeros(N), np.zeros(N)
        elif profile == "single-mode":
            k = int(spec.get("mode", 0))
            u0, u1 = np.zeros(N), np.zeros(N)
            u0[k] = float(spec.get("u0", 1.0))
            u1[k] = float(spec.get("u1", 0.0))
        elif profile == "gaussian-bump":
            center = np.broadcast_to(np.asarray(spec.get("center", 0.0), dtype=float), (basis.dimension,))
            width = float(spec.get("width", 1.0))
            r2 = np.sum((basis.nodes - center) ** 2, axis=1)
            bump = np.exp(-r2 / (2 * width**2))
            u0 = forward_transform(basis, float(spec.get("u0", 1.0)) * bump)
            u1 = forward_transform(basis, float(spec.get("u1", 0.0)) * bump)
        elif profile == "random":
            rng = np.random.default_rng(int(spec.get("seed", self.seed)))
            decay = float(spec.get("decay", 0.5))
            u0 = rng.standard_normal(N) * (1 + lam) ** (-sigma / 2 - decay)
            u1 = rng.standard_normal(N) * (1 + lam) ** (-(sigma - 1) / 2 - decay)
        elif profile == "file":
            path = Path(spec["path"])
            if not path.is_absolute() and self.base_dir is not None:
                path = self.base_dir / path
            doc = json.loads(path.read_text())
            u0 = np.asarray(doc["u0_hat"], dtype=float)
            u1 = np.asarray(doc["u1_hat"], dtype=float)
        else:
            raise ValidationError(f"unknown initial profile {profile!r}")
        if "epsilon" in spec:
            eps = smallness_check(basis, u0, u1, sigma).epsilon
            if eps > 0:
                scale = float(spec["epsilon"]) / eps
                u0, u1 = u0 * scale, u1 * scale
        return u0, u1

    # -- validation --------------------------------------------------------

    def validate(self) -> None:
        """Check every precondition before any computation.

        Raises :class:`AssumptionError` for a failed standing assumption and
        :class:`ValidationError` listing all other problems.
        """
        issues = []
        if self.problem not in PROBLEM_CLASSES:
            issues.append(f"problem.class must be one of {PROBLEM_CLASSES}, got {self.problem!r}")
        try:
            b = float(self.b)
        except (TypeError, ValueError):
            b = float("nan")
            issues.append(f"params.b must be a number, got {self.b!r}")
        if not b > 0:
            raise AssumptionError(f"b>0 fails: given b={self.b!r}", "b>0")
        basis = self.basis()
        lam0 = basis.bottom
        if not lam0 + float(self.m) > 0:
            raise AssumptionError(
                f"λ₀+m>0 fails: {basis.name} basis has λ₀={lam0:g}, given m={float(self.m):g}",
                "λ₀+m>0",
            )
        if self.problem in PROBLEM_CLASSES and self.problem != "linear":
            if not self.nonlinearity:
                issues.append(f"problem.class = {self.problem!r} needs a [nonlinearity] table")
            else:
                nl = self.nl()
                got = _NL_CLASS[type(nl).__name__]
                if got != self.problem:
                    issues.append(f"nonlinearity kind describes a {got} problem, scenario declares {self.problem}")
        t = self.times()
        if t.ndim != 1 or t.size < 2:
            issues.append("time grid needs at least two samples")
        elif t[0] != 0 or np.any(np.diff(t) <= 0):
            issues.append("time grid must start at 0 and increase strictly")
        if self.initial.get("profile", "zero") == "single-mode":
            k = int(self.initial.get("mode", 0))
            if not 0 <= k < basis.size:
                issues.append(f"initial.mode {k} outside 0..{basis.size - 1}")
        if issues:
            raise ValidationError("invalid scenario", issues)
        u0, u1 = self.initial_data()
        if not (np.all(np.isfinite(u0)) and np.all(np.isfinite(u1))):
            raise ValidationError("initial data is not finite")

    def describe(self) -> dict:
        return {
            "name": self.name,
            "problem_class": self.problem,
            "basis": {"name": self.basis().name, "size": self.basis().size,
                      "dimension": self.basis().dimension, "bottom": self.basis().bottom,
                      "spec": _plain(self.basis_spec)},
            "params": {"b": float(self.b), "m": float(self.m)},
            "nonlinearity": _plain(self.nonlinearity) if self.problem != "linear" else None,
            "initial": _plain(self.initial),
            "seed": int(self.seed),
        }


def _plain(d):
    return json.loads(json.dumps(d, default=str))


def load_scenario(path, seed: Optional[int] = None) -> Scenario:
    path = resolve_scenario_path(path)
    if not path.exists():
        raise ValidationError("scenario file not found", [str(path)])
    try:
        doc = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError("scenario is not valid TOML", [str(exc)]) from exc
    sc = Scenario.from_dict(doc, name=path.stem, base_dir=path.parent)
    if seed is not None:
        sc.seed = int(seed)
        sc.initial["seed"] = int(seed)
    return sc
