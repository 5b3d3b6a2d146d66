"""Eigenbasis abstraction and the operator-adapted Fourier calculus.

An operator with discrete spectrum is represented by a finite list of
eigenpairs ``(lambda_xi, e_xi)`` together with the quadrature rule that
realizes the inner product of ``H = L^2(Omega)``.  Coefficient vectors are
plain :class:`numpy.ndarray` objects whose last axis runs over modes; grid
functions are arrays whose last axis runs over quadrature nodes.  Leading
axes (typically time) are broadcast through every operation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ShapeError, SingularNormError, ValidationError

__all__ = [
    "SpectralBasis",
    "forward_transform",
    "inverse_transform",
    "h_norm",
    "grid_norm",
    "sobolev_norm",
    "l_convolution",
    "apply_l_power",
    "spectral_tail",
    "basis_to_dict",
    "basis_from_dict",
    "save_basis",
    "load_basis",
]

GRAM_TOL = 1e-10


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Truncated eigenbasis of a positive operator.

    Parameters
    ----------
    dimension : int
        Spatial dimension of the underlying domain.
    eigenvalues : array_like, shape (N,)
        Nondecreasing, nonnegative eigenvalues.
    table : array_like, shape (N, M)
        ``table[xi, j]`` is the eigenfunction ``e_xi`` at quadrature node ``j``.
    nodes : array_like, shape (M, dimension)
        Quadrature nodes.
    weights : array_like, shape (M,)
        Positive quadrature weights (with respect to the volume measure).
    name : str
        Short identifier used in manifests.
    multi_indices : list of tuple, optional
        Labels for the modes, in the same order as ``eigenvalues``.
    infimum_exact : bool
        Whether the retained bottom eigenvalue is the true bottom of the
        spectrum.
    evaluator : callable, optional
        ``evaluator(points) -> (N, P)`` evaluating the eigenfunctions at
        arbitrary points of shape ``(P, dimension)``.
    """

    dimension: int
    eigenvalues: np.ndarray
    table: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    name: str = "explicit"
    multi_indices: Optional[Sequence[tuple]] = None
    infimum_exact: bool = True
    evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        eig = np.asarray(self.eigenvalues, dtype=float)
        table = np.asarray(self.table)
        if not np.iscomplexobj(table):
            table = table.astype(float)
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        weights = np.asarray(self.weights, dtype=float)
        if eig.ndim != 1 or table.ndim != 2 or table.shape[0] != eig.size:
            raise ShapeError(
                f"eigenfunction table {table.shape} does not match {eig.size} eigenvalues"
            )
        if nodes.shape[0] != table.shape[1] or weights.shape != (table.shape[1],):
            raise ShapeError(
                f"{table.shape[1]} table columns but {nodes.shape[0]} nodes / {weights.size} weights"
            )
        if nodes.shape[1] != self.dimension:
            raise ShapeError(f"nodes have dimension {nodes.shape[1]}, basis declares {self.dimension}")
        object.__setattr__(self, "eigenvalues", _readonly(eig))
        object.__setattr__(self, "table", _readonly(table))
        object.__setattr__(self, "nodes", _readonly(nodes))
        object.__setattr__(self, "weights", _readonly(weights))
        if self.multi_indices is not None:
            object.__setattr__(self, "multi_indices", [tuple(k) for k in self.multi_indices])

    @property
    def size(self) -> int:
        """Truncation size N (number of retained modes)."""
        return self.eigenvalues.size

    @property
    def n_nodes(self) -> int:
        return self.weights.size

    @property
    def bottom(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.table)

    def gram(self) -> np.ndarray:
        """Discrete Gram matrix ``sum_j w_j e_xi(x_j) conj(e_eta(x_j))``."""
        return (self.table * self.weights) @ self.table.conj().T

    def gram_deviation(self) -> float:
        return float(np.max(np.abs(self.gram() - np.eye(self.size))))

    def validate(self, tol: float = GRAM_TOL) -> None:
        """Check the basis invariants, raising :class:`ValidationError` listing every violation."""
        issues = []
        eig = self.eigenvalues
        if not np.all(np.isfinite(eig)):
            issues.append("non-finite eigenvalues")
        neg = np.flatnonzero(eig < 0)
        if neg.size:
            issues.extend(f"positivity violation: eigenvalue[{i}] = {eig[i]!r} < 0" for i in neg)
        unsorted = np.flatnonzero(np.diff(eig) < 0)
        if unsorted.size:
            issues.extend(
                f"eigenvalues not sorted: eigenvalue[{i}] = {eig[i]!r} > eigenvalue[{i + 1}] = {eig[i + 1]!r}"
                for i in unsorted
            )
        bad_w = np.flatnonzero(~(self.weights > 0))
        if bad_w.size:
            issues.extend(f"quadrature weight[{j}] = {self.weights[j]!r} is not positive" for j in bad_w)
        if not np.all(np.isfinite(self.table)):
            issues.append("non-finite eigenfunction values")
        else:
            dev = np.abs(self.gram() - np.eye(self.size))
            for i, j in zip(*np.nonzero(dev > tol)):
                if i <= j:
                    issues.append(f"Gram deviation |G[{i},{j}] - delta| = {dev[i, j]:.3e} > {tol:.1e}")
        if issues:
            raise ValidationError("basis invariants violated", issues)


def _check_modes(basis: SpectralBasis, c, what="coefficients"):
    c = np.asarray(c)
    if c.ndim == 0 or c.shape[-1] != basis.size:
        raise ShapeError(f"{what} have trailing length {c.shape[-1:] or ()}, basis has {basis.size} modes")
    return c


def _check_nodes(basis: SpectralBasis, f):
    f = np.asarray(f)
    if f.ndim == 0 or f.shape[-1] != basis.n_nodes:
        raise ShapeError(
            f"grid function has trailing length {f.shape[-1:] or ()}, basis has {basis.n_nodes} nodes"
        )
    return f


def _maybe_real(a, basis):
    # shipped bases are real: keep real data real instead of promoting to complex
    if basis.is_real and not np.iscomplexobj(a):
        return a.astype(float, copy=False)
    return a


def forward_transform(basis: SpectralBasis, f) -> np.ndarray:
    """Coefficients ``f_hat(xi) = (f, e_xi)`` by the basis quadrature rule.

    ``f`` may carry leading batch axes; the last axis must run over nodes.
    """
    f = _check_nodes(basis, f)
    return _maybe_real((f * basis.weights) @ basis.table.conj().T, basis)


def inverse_transform(basis: SpectralBasis, c) -> np.ndarray:
    """Synthesize ``sum_xi c(xi) e_xi`` at the quadrature nodes."""
    c = _check_modes(basis, c)
    return _maybe_real(c @ basis.table, basis)


def h_norm(basis: SpectralBasis, c) -> np.ndarray:
    """Hilbert-space norm via Plancherel, ``(sum |c|^2)^(1/2)`` over the last axis."""
    c = _check_modes(basis, c)
    return np.sqrt(np.sum(np.abs(c) ** 2, axis=-1))


def grid_norm(basis: SpectralBasis, f) -> np.ndarray:
    """Physical-space norm ``(sum_j w_j |f_j|^2)^(1/2)``."""
    f = _check_nodes(basis, f)
    return np.sqrt(np.sum(basis.weights * np.abs(f) ** 2, axis=-1))


def _powers(basis, c, s, err_label):
    lam = basis.eigenvalues
    if s >= 0:
        with np.errstate(divide="ignore"):
            return lam ** s if s != 0 else np.ones_like(lam)
    zero = lam == 0
    if np.any(zero):
        hit = np.any(np.asarray(c)[..., zero] != 0)
        if hit:
            modes = np.flatnonzero(zero).tolist()
            raise SingularNormError(f"{err_label} with exponent {s} on zero eigenvalue(s) at modes {modes}")
    out = np.zeros_like(lam)
    out[~zero] = lam[~zero] ** s
    return out


def sobolev_norm(basis: SpectralBasis, c, s: float) -> np.ndarray:
    """Operator Sobolev norm ``(sum lambda^s |c|^2)^(1/2)``.

    For ``s == 0`` this is :func:`h_norm` exactly.  Negative ``s`` is allowed
    when every zero-eigenvalue mode carries a zero coefficient.
    """
    c = _check_modes(basis, c)
    if s == 0:
        return h_norm(basis, c)
    w = _powers(basis, c, s, "Sobolev norm")
    return np.sqrt(np.sum(w * np.abs(c) ** 2, axis=-1))


def l_convolution(basis: SpectralBasis, f, g) -> np.ndarray:
    """Operator convolution in coefficient space: the pointwise product ``f_hat * g_hat``."""
    f = _check_modes(basis, f)
    g = _check_modes(basis, g)
    return f * g


def apply_l_power(basis: SpectralBasis, c, beta: float) -> np.ndarray:
    """Coefficients of ``L^beta u``, i.e. ``lambda^beta * c``."""
    c = _check_modes(basis, c)
    if beta == 0:
        return np.array(c, copy=True)
    if beta < 0 and np.any(basis.eigenvalues == 0):
        modes = np.flatnonzero(basis.eigenvalues == 0).tolist()
        raise SingularNormError(f"operator power {beta} undefined: zero eigenvalue(s) at modes {modes}")
    return _powers(basis, c, beta, "operator power") * c


def spectral_tail(basis: SpectralBasis, f) -> np.ndarray:
    """Norm of the part of ``f`` not captured by the retained modes.

    Computed from Bessel's identity ``||f||^2 - ||P_N f||^2`` on the grid,
    clipped at zero against rounding.
    """
    f = _check_nodes(basis, f)
    total = grid_norm(basis, f) ** 2
    kept = h_norm(basis, forward_transform(basis, f)) ** 2
    return np.sqrt(np.maximum(total - kept, 0.0))


# ----------------------------------------------------------------- JSON format


def basis_to_dict(basis: SpectralBasis) -> dict:
    doc = {
        "dimension": int(basis.dimension),
        "name": basis.name,
        "eigenvalues": basis.eigenvalues.tolist(),
        "nodes": basis.nodes.tolist() if basis.dimension > 1 else basis.nodes[:, 0].tolist(),
        "weights": basis.weights.tolist(),
        "eigenfunction_table": np.real(basis.table).tolist(),
    }
    if not basis.is_real:
        doc["eigenfunction_table_imag"] = np.imag(basis.table).tolist()
    if basis.multi_indices is not None:
        doc["multi_indices"] = [list(k) for k in basis.multi_indices]
    return doc


def basis_from_dict(doc: dict, validate: bool = True, tol: float = GRAM_TOL) -> SpectralBasis:
    missing = [k for k in ("dimension", "eigenvalues", "nodes", "weights", "eigenfunction_table") if k not in doc]
    if missing:
        raise ValidationError("basis document incomplete", [f"missing key {k!r}" for k in missing])
    table = np.asarray(doc["eigenfunction_table"], dtype=float)
    if "eigenfunction_table_imag" in doc:
        table = table + 1j * np.asarray(doc["eigenfunction_table_imag"], dtype=float)
    basis = SpectralBasis(
        dimension=int(doc["dimension"]),
        eigenvalues=doc["eigenvalues"],
        table=table,
        nodes=doc["nodes"],
        weights=doc["weights"],
        name=doc.get("name", "explicit"),
        multi_indices=doc.get("multi_indices"),
    )
    if validate:
        basis.validate(tol)
    return basis


def save_basis(basis: SpectralBasis, path) -> None:
    # json writes floats with repr(), the shortest round-trip decimal
    Path(path).write_text(json.dumps(basis_to_dict(basis), indent=1) + "\n")


def load_basis(path, validate: bool = True, tol: float = GRAM_TOL) -> SpectralBasis:
    return basis_from_dict(json.loads(Path(path).read_text()), validate=validate, tol=tol)
