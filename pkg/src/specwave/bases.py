"""Concrete eigenbases: harmonic oscillator, flat torus, explicit eigenpairs."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import roots_hermite

from .errors import ConfigurationError, ValidationError
from .spectral import GRAM_TOL, SpectralBasis

__all__ = [
    "HermiteSpec",
    "TorusSpec",
    "ExplicitOperatorSpec",
    "hermite_functions",
    "hermite_raised_operator",
    "hermite_gauss_rule",
    "build_harmonic_oscillator",
    "build_torus",
    "build_explicit",
    "l1_norms",
    "oscillator_residual",
]

MAX_HERMITE_DEGREE = 500

_RESCALE = 1e150


def hermite_functions(max_degree: int, x) -> np.ndarray:
    """Orthonormal Hermite functions ``phi_0 .. phi_max_degree`` at ``x``.

    Uses the normalized three-term recurrence

        phi_{m+1} = x sqrt(2/(m+1)) phi_m - sqrt(m/(m+1)) phi_{m-1}

    on the polynomial part, with the Gaussian factor carried as a running
    log-scale so that neither factorials nor ``exp(-x^2/2)`` underflow.

    Returns
    -------
    ndarray, shape (max_degree + 1,) + x.shape
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((max_degree + 1,) + x.shape)
    log_scale = -0.5 * x**2
    prev = np.zeros_like(x)
    cur = np.full_like(x, math.pi**-0.25)
    out[0] = cur * np.exp(log_scale)
    for m in range(max_degree):
        nxt = x * math.sqrt(2.0 / (m + 1)) * cur - math.sqrt(m / (m + 1)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > _RESCALE
        if np.any(big):
            prev = np.where(big, prev / _RESCALE, prev)
            cur = np.where(big, cur / _RESCALE, cur)
            log_scale = np.where(big, log_scale + math.log(_RESCALE), log_scale)
        out[m + 1] = cur * np.exp(log_scale)
    return out


def hermite_raised_operator(m: int, x) -> np.ndarray:
    """``e_m`` from the raising-operator formula ``c_m (t - d/dt)^m e^{-t^2/2}``.

    Kept as an independent cross-check of :func:`hermite_functions`; only
    sensible for small ``m`` (coefficients grow factorially).
    """
    # (t - d/dt)(p e^{-t^2/2}) = (2 t p - p') e^{-t^2/2}
    p = np.polynomial.Polynomial([1.0])
    t = np.polynomial.Polynomial([0.0, 1.0])
    for _ in range(m):
        p = 2 * t * p - p.deriv()
    c_m = 2.0 ** (-m / 2) / math.sqrt(math.factorial(m)) * math.pi**-0.25
    x = np.asarray(x, dtype=float)
    return c_m * p(x) * np.exp(-0.5 * x**2)


def hermite_gauss_rule(size: int):
    """Gauss-Hermite nodes with weights for the plain measure ``dx``.

    The weights ``w_j exp(x_j^2)`` are formed by the Christoffel identity
    ``1 / sum_k phi_k(x_j)^2`` which avoids overflow of ``exp(x_j^2)``.
    """
    x, _ = roots_hermite(size)
    phi = hermite_functions(size - 1, x)
    w = 1.0 / np.sum(phi**2, axis=0)
    return x, w


@dataclass(frozen=True)
class HermiteSpec:
    """Harmonic oscillator ``-Delta + |x|^2`` on ``R^n``.

    ``truncation`` is ``"box"`` (each ``k_j <= max_degree``) or ``"total"``
    (``sum k_j <= max_degree``, which keeps every eigenvalue below a cutoff).
    """

    dimension: int = 1
    max_degree: int = 31
    quadrature: Optional[int] = None
    truncation: str = "box"

    @property
    def quadrature_size(self) -> int:
        return self.quadrature if self.quadrature is not None else self.max_degree + 1


@dataclass(frozen=True)
class TorusSpec:
    """Laplacian ``-Delta`` on the flat torus ``[0, 2 pi)^d``."""

    dimension: int = 1
    max_frequency: int = 8
    grid: Optional[int] = None

    @property
    def grid_size(self) -> int:
        return self.grid if self.grid is not None else 2 * self.max_frequency + 2


@dataclass(frozen=True)
class ExplicitOperatorSpec:
    eigenvalues: Sequence[float]
    eigenvectors: Sequence[Sequence[float]]
    nodes: Sequence
    weights: Sequence[float]
    dimension: int = 1
    tolerance: float = 1e-8
    name: str = "explicit"


def _sorted_modes(eigs, labels):
    order = sorted(range(len(eigs)), key=lambda i: (eigs[i], labels[i]))
    return order


def _tensor_grid(axes_nodes, axes_weights):
    pts = np.array(list(itertools.product(*axes_nodes)), dtype=float)
    w = np.array([math.prod(ws) for ws in itertools.product(*axes_weights)], dtype=float)
    return pts, w


def build_harmonic_oscillator(spec: HermiteSpec) -> SpectralBasis:
    """Hermite-function eigenbasis with eigenvalues ``sum_j (2 k_j + 1)``."""
    n, D, Q = spec.dimension, spec.max_degree, spec.quadrature_size
    issues = []
    if n < 1:
        issues.append(f"dimension must be positive, got {n}")
    if D < 0:
        issues.append(f"max_degree must be nonnegative, got {D}")
    if D > MAX_HERMITE_DEGREE:
        issues.append(f"max_degree {D} exceeds overflow guard {MAX_HERMITE_DEGREE}")
    if Q < D + 1:
        issues.append(f"quadrature size {Q} < max_degree + 1 = {D + 1}")
    if spec.truncation not in ("box", "total"):
        issues.append(f"unknown truncation {spec.truncation!r}")
    if issues:
        raise ConfigurationError("invalid HermiteSpec", issues)

    x, w = hermite_gauss_rule(Q)
    phi = hermite_functions(D, x)  # (D+1, Q)
    labels = [k for k in itertools.product(range(D + 1), repeat=n)
              if spec.truncation == "box" or sum(k) <= D]
    eigs = [float(sum(2 * kj + 1 for kj in k)) for k in labels]
    order = _sorted_modes(eigs, labels)
    labels = [labels[i] for i in order]
    eigs = [eigs[i] for i in order]

    nodes, weights = _tensor_grid([x] * n, [w] * n)
    grids = list(itertools.product(range(Q), repeat=n))
    idx = np.array(grids, dtype=int).reshape(-1, n)
    table = np.ones((len(labels), len(grids)))
    for r, k in enumerate(labels):
        for j in range(n):
            table[r] *= phi[k[j], idx[:, j]]

    def evaluator(points, labels=tuple(labels)):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        vals = [hermite_functions(D, points[:, j]) for j in range(n)]
        out = np.ones((len(labels), points.shape[0]))
        for r, k in enumerate(labels):
            for j in range(n):
                out[r] *= vals[j][k[j]]
        return out

    return SpectralBasis(
        dimension=n,
        eigenvalues=eigs,
        table=table,
        nodes=nodes,
        weights=weights,
        name="hermite",
        multi_indices=labels,
        infimum_exact=True,
        evaluator=evaluator,
    )


def _circle_function(j: int, x):
    # j = 0 constant, j > 0 cos(j x), j < 0 sin(|j| x); orthonormal on [0, 2 pi)
    if j == 0:
        return np.full_like(x, 1.0 / math.sqrt(2 * math.pi))
    if j > 0:
        return np.cos(j * x) / math.sqrt(math.pi)
    return np.sin(-j * x) / math.sqrt(math.pi)


def build_torus(spec: TorusSpec) -> SpectralBasis:
    """Real trigonometric eigenbasis of ``-Delta`` on ``[0, 2 pi)^d``.

    Mode labels are integer tuples; on each axis ``0`` is the constant,
    ``+k`` is ``cos(k x)`` and ``-k`` is ``sin(k x)``.  The eigenvalue is the
    squared length of the frequency vector, so the constant mode has
    eigenvalue zero.
    """
    d, K, M = spec.dimension, spec.max_frequency, spec.grid_size
    issues = []
    if d < 1:
        issues.append(f"dimension must be positive, got {d}")
    if K < 0:
        issues.append(f"max_frequency must be nonnegative, got {K}")
    if M <= 2 * K:
        issues.append(f"aliasing: grid size {M} must exceed 2 * max_frequency = {2 * K}")
    if issues:
        raise ConfigurationError("invalid TorusSpec", issues)

    x = 2 * math.pi * np.arange(M) / M
    w = np.full(M, 2 * math.pi / M)
    one_d = {j: _circle_function(j, x) for j in range(-K, K + 1)}
    labels = list(itertools.product(range(-K, K + 1), repeat=d))
    eigs = [float(sum(kj * kj for kj in k)) for k in labels]
    order = _sorted_modes(eigs, labels)
    labels = [labels[i] for i in order]
    eigs = [eigs[i] for i in order]

    nodes, weights = _tensor_grid([x] * d, [w] * d)
    idx = np.array(list(itertools.product(range(M), repeat=d)), dtype=int).reshape(-1, d)
    table = np.ones((len(labels), idx.shape[0]))
    for r, k in enumerate(labels):
        for j in range(d):
            table[r] *= one_d[k[j]][idx[:, j]]

    def evaluator(points, labels=tuple(labels)):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.ones((len(labels), points.shape[0]))
        for r, k in enumerate(labels):
            for j in range(d):
                out[r] *= _circle_function(k[j], points[:, j])
        return out

    return SpectralBasis(
        dimension=d,
        eigenvalues=eigs,
        table=table,
        nodes=nodes,
        weights=weights,
        name="torus",
        multi_indices=labels,
        infimum_exact=True,
        evaluator=evaluator,
    )


def build_explicit(spec: ExplicitOperatorSpec) -> SpectralBasis:
    """Wrap user-declared eigenpairs after checking every basis invariant."""
    try:
        basis = SpectralBasis(
            dimension=spec.dimension,
            eigenvalues=spec.eigenvalues,
            table=spec.eigenvectors,
            nodes=spec.nodes,
            weights=spec.weights,
            name=spec.name,
            infimum_exact=False,
        )
    except ValueError as exc:
        raise ValidationError("explicit operator rejected", [str(exc)]) from exc
    basis.validate(spec.tolerance)
    return basis


def l1_norms(basis: SpectralBasis) -> np.ndarray:
    """``||e_xi||_{L^1}`` for every mode, by the basis quadrature rule."""
    return np.abs(basis.table) @ basis.weights


# 8th-order central stencil for the second derivative
_D2_STENCIL = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])


def oscillator_residual(basis: SpectralBasis, h: float = 1e-2) -> np.ndarray:
    """Relative residual ``||(-Delta + |x|^2) e_k - lambda_k e_k|| / ||lambda_k e_k||``.

    The Laplacian is applied by an 8th-order finite-difference stencil
    centred at each quadrature node, using the basis evaluator.
    """
    if basis.evaluator is None:
        raise ValidationError("basis has no evaluator, cannot form finite differences")
    X = basis.nodes
    lap = np.zeros_like(basis.table)
    offsets = np.arange(-4, 5)
    for axis in range(basis.dimension):
        for c, o in zip(_D2_STENCIL, offsets):
            shifted = X.copy()
            shifted[:, axis] += o * h
            lap += c * basis.evaluator(shifted)
    lap /= h * h
    applied = -lap + np.sum(X**2, axis=1) * basis.table
    expected = basis.eigenvalues[:, None] * basis.table
    num = np.sqrt(np.sum(basis.weights * (applied - expected) ** 2, axis=1))
    den = np.sqrt(np.sum(basis.weights * expected**2, axis=1))
    return num / den
