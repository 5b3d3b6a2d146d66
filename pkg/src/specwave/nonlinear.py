"""Duhamel integral and Picard iteration for nonlinear damped wave equations.

The solution of ``u'' + L u + b u' + m u = F`` is sought as a fixed point
of

    Gamma[u](t) = K0(t) * u0 + K1(t) * u1 + int_0^t K1(t - tau) * F(u)(tau) dtau,

iterated from the linear solution.  Time integrals use the composite
trapezoid rule on the caller's grid.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
from scipy.signal import fftconvolve

from .errors import (
    DomainError,
    NonContractionError,
    ShapeError,
    UnsupportedError,
    ValidationError,
)
from .propagator import (
    DampingParams,
    DecayEnvelope,
    Trajectory,
    classify_decay,
    mode_kernels,
    solve_linear,
)
from .spectral import (
    SpectralBasis,
    apply_l_power,
    forward_transform,
    h_norm,
    inverse_transform,
    sobolev_norm,
)

__all__ = [
    "SemilinearPower",
    "GeneralFirstOrder",
    "HigherOrder",
    "Nonlinearity",
    "StateVector",
    "SmallnessReport",
    "PicardRun",
    "duhamel_integral",
    "time_derivatives",
    "build_state_vector",
    "z_norm",
    "z_norm_terms",
    "smallness_check",
    "source_coefficients",
    "picard_solve",
    "zspace_order",
    "make_nonlinearity",
]

# beyond this many samples the direct O(T^2) convolution gives way to FFT
_DIRECT_CONV_LIMIT = 6000


# ---------------------------------------------------------------- nonlinearities


@dataclass(frozen=True)
class SemilinearPower:
    """``f(u) = mu |u|^{p-1} u`` applied pointwise on the quadrature grid."""

    p: float
    mu: float

    def __post_init__(self):
        if not self.p > 1:
            raise ValidationError(f"power nonlinearity needs p > 1, got {self.p!r}")

    order = 1
    problem_class = "semilinear"

    def grid(self, u):
        if self.mu == 0:
            return np.zeros_like(u)
        return self.mu * np.abs(u) ** (self.p - 1) * u

    def describe(self):
        return {"kind": "power", "p": self.p, "mu": self.mu}


@dataclass(frozen=True)
class GeneralFirstOrder:
    """``F(u, u_t, L^{1/2} u)``.

    ``mode="pointwise"``: ``func(u, ut, lu)`` receives grid samples and
    returns grid samples.  ``mode="coefficient"``: ``func`` receives the
    coefficient arrays (last axis modes, leading axis time) and returns
    coefficients, which covers functionals such as ``phi * ||U||^p``.
    """

    func: Callable
    mode: str = "pointwise"
    p: Optional[float] = None
    label: str = "custom"

    order = 1
    problem_class = "general"

    def describe(self):
        return {"kind": self.label, "mode": self.mode, "p": self.p}


@dataclass(frozen=True)
class HigherOrder:
    """``F_l(u, {d_t^j u}, {L^{j/2} u})`` for ``j = 1..l``.

    The callable receives ``(u, dts, lpows)`` where ``dts`` and ``lpows`` are
    lists of length ``l``; the representation follows ``mode`` as in
    :class:`GeneralFirstOrder`.
    """

    l: int
    func: Callable
    mode: str = "pointwise"
    p: Optional[float] = None
    label: str = "custom"

    problem_class = "higher-order"

    def __post_init__(self):
        if self.l < 1:
            raise ValidationError(f"order l must be a positive integer, got {self.l!r}")

    @property
    def order(self):
        return self.l

    def describe(self):
        return {"kind": self.label, "mode": self.mode, "p": self.p, "l": self.l}


Nonlinearity = Union[SemilinearPower, GeneralFirstOrder, HigherOrder]


def zspace_order(nl: Optional[Nonlinearity]) -> int:
    """Highest ``alpha + 2 beta`` in the Z-norm used for this class of nonlinearity."""
    if nl is None or isinstance(nl, SemilinearPower):
        return 1
    if isinstance(nl, GeneralFirstOrder):
        return 2
    return nl.l + 1


def data_sigma(nl: Optional[Nonlinearity]) -> int:
    """Sobolev order of ``u0`` in the smallness condition (``u1`` is one lower)."""
    return zspace_order(nl)


# ----------------------------------------------------------------- Duhamel term


def _check_grid(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ShapeError("time grid must be a nonempty one-dimensional array")
    if times[0] != 0:
        raise DomainError("Duhamel integral requires the time grid to start at t = 0")
    if np.any(np.diff(times) <= 0):
        raise DomainError("time grid must be strictly increasing")
    return times


def _uniform_step(times):
    if times.size < 2:
        return None
    dt = np.diff(times)
    h = (times[-1] - times[0]) / (times.size - 1)
    if np.max(np.abs(dt - h)) <= 1e-12 * max(h, 1.0) * times.size:
        return h
    return None


def _conv(kernel, s):
    if kernel.size <= _DIRECT_CONV_LIMIT:
        return np.convolve(kernel, s)[: kernel.size]
    return fftconvolve(kernel, s)[: kernel.size]


def _duhamel_mode_uniform(r1, dr1, s, h):
    if np.iscomplexobj(s):
        jr, jtr = _duhamel_mode_uniform(r1, dr1, s.real, h)
        ji, jti = _duhamel_mode_uniform(r1, dr1, s.imag, h)
        return jr + 1j * ji, jtr + 1j * jti
    # trapezoid: h * (sum_{j<=i} r_{i-j} s_j - r_i s_0 / 2 - r_0 s_i / 2)
    j = h * (_conv(r1, s) - 0.5 * r1 * s[0] - 0.5 * r1[0] * s)
    jt = h * (_conv(dr1, s) - 0.5 * dr1 * s[0] - 0.5 * dr1[0] * s)
    j[0] = 0.0
    jt[0] = 0.0
    return j, jt


def _duhamel_mode_general(shifted, b, times, s):
    T = times.size
    j = np.zeros(T, dtype=s.dtype)
    jt = np.zeros(T, dtype=s.dtype)
    for i in range(1, T):
        tau = times[: i + 1]
        _, r1, _, dr1 = mode_kernels(shifted, b, times[i] - tau)
        w = np.empty(i + 1)
        dt = np.diff(tau)
        w[0] = dt[0] / 2
        w[-1] = dt[-1] / 2
        w[1:-1] = (dt[:-1] + dt[1:]) / 2
        j[i] = np.dot(w * r1, s[: i + 1])
        jt[i] = np.dot(w * dr1, s[: i + 1])
    return j, jt


def duhamel_integral(basis: SpectralBasis, params: DampingParams, source, times,
                     threads: int = 1):
    """``J(t) = int_0^t K1(t - tau) * s(tau) dtau`` and its time derivative.

    Parameters
    ----------
    source : array_like, shape (T, N)
        Source coefficients sampled on ``times``.
    times : array_like, shape (T,)
        Strictly increasing grid starting at 0.
    threads : int
        Modes are independent; ``threads > 1`` spreads them over a pool.
        Results do not depend on the thread count.

    Returns
    -------
    J, Jt : ndarray, shape (T, N)
    """
    times = _check_grid(times)
    source = np.asarray(source)
    if source.shape != (times.size, basis.size):
        raise ShapeError(f"source has shape {source.shape}, expected {(times.size, basis.size)}")
    J = np.zeros(source.shape, dtype=np.result_type(source, float))
    Jt = np.zeros_like(J)
    active = [k for k in range(basis.size) if np.any(source[:, k] != 0)]
    if not active:
        return J, Jt
    shifted = basis.eigenvalues + params.m
    h = _uniform_step(times)
    if h is not None:
        lags = h * np.arange(times.size)

    def one(k):
        if h is not None:
            _, r1, _, dr1 = mode_kernels(shifted[k], params.b, lags)
            return _duhamel_mode_uniform(r1, dr1, source[:, k], h)
        return _duhamel_mode_general(shifted[k], params.b, times, source[:, k])

    if threads > 1 and len(active) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, active))
    else:
        results = [one(k) for k in active]
    for k, (jk, jtk) in zip(active, results):
        J[:, k] = jk
        Jt[:, k] = jtk
    return J, Jt


# ---------------------------------------------------------- state vector, norms


def time_derivatives(traj: Trajectory, upto: int) -> List[np.ndarray]:
    """Coefficients of ``d_t^j u`` for ``j = 0..upto``.

    Orders above one come from the equation itself,
    ``d_t^{j} u = -(lambda + m) d_t^{j-2} u - b d_t^{j-1} u + d_t^{j-2} F``,
    so orders three and up need time derivatives of the source and are only
    available when the trajectory carries no source.
    """
    out = [traj.u_hat, traj.ut_hat]
    if upto <= 1:
        return out[: upto + 1]
    src = traj.source
    has_source = src is not None and np.any(src != 0)
    if upto >= 3 and has_source:
        raise UnsupportedError(
            f"time derivative of order {upto} needs time-differentiated sources, "
            "which are not available for nonlinear trajectories"
        )
    shifted = traj.basis.eigenvalues + traj.params.m
    b = traj.params.b
    for j in range(2, upto + 1):
        nxt = -shifted * out[j - 2] - b * out[j - 1]
        if j == 2 and has_source:
            nxt = nxt + src
        out.append(nxt)
    return out


@dataclass
class StateVector:
    """``U = (u, {d_t^j u}, {L^{j/2} u})`` as coefficient arrays of shape ``(T, N)``."""

    u: np.ndarray
    dts: List[np.ndarray]
    lpows: List[np.ndarray]

    @property
    def l(self):
        return len(self.dts)

    def components(self):
        return [self.u, *self.dts, *self.lpows]


def build_state_vector(basis: SpectralBasis, traj: Trajectory, l: int) -> StateVector:
    """Assemble the argument tuple of an order-``l`` nonlinearity."""
    if l < 1:
        raise DomainError(f"state vector order must be >= 1, got {l}")
    derivs = time_derivatives(traj, l)
    lpows = [apply_l_power(basis, traj.u_hat, j / 2) for j in range(1, l + 1)]
    return StateVector(traj.u_hat, derivs[1:], lpows)


def _index_pairs(order: int):
    # (alpha, beta) in N0 x (1/2)N0 with alpha + 2 beta <= order
    return [(a, k / 2) for a in range(order + 1) for k in range(order - a + 1)]


def z_norm_terms(traj: Trajectory, order: int) -> np.ndarray:
    """Per-time sum of ``||d_t^alpha L^beta u(t)||`` over ``alpha + 2 beta <= order``."""
    derivs = time_derivatives(traj, order)
    total = np.zeros(len(traj.times))
    for a, beta in _index_pairs(order):
        total += sobolev_norm(traj.basis, derivs[a], 2 * beta)
    return total


def z_norm(traj: Trajectory, envelope: DecayEnvelope, order: int = 1) -> float:
    """Grid supremum of ``(1+t)^{-q} e^{gamma t}`` times the norm sum.

    ``order`` 1 reproduces ``||u|| + ||u_t|| + ||L^{1/2} u||``; 2 adds the
    second-order terms; ``l + 1`` is the higher-order case.  ``order = 0``
    keeps only ``||u||``.  On a finite grid this is a lower bound for the
    supremum over all ``t >= 0``.
    """
    if len(traj.times) == 0:
        return 0.0
    return float(np.max(envelope.weight(traj.times) * z_norm_terms(traj, order)))


@dataclass(frozen=True)
class SmallnessReport:
    epsilon: float
    threshold: float
    sigma: float
    passed: bool

    def to_dict(self):
        return {"epsilon": self.epsilon, "threshold": self.threshold, "sigma": self.sigma,
                "pass": self.passed}


def smallness_check(basis: SpectralBasis, u0_hat, u1_hat, sigma: float = 1,
                    threshold: float = 1e-2) -> SmallnessReport:
    """``eps = ||u0||_{H^sigma} + ||u1||_{H^{sigma-1}}`` compared with ``threshold``."""
    eps = float(sobolev_norm(basis, u0_hat, sigma) + sobolev_norm(basis, u1_hat, sigma - 1))
    return SmallnessReport(eps, float(threshold), float(sigma), eps <= threshold)


# ------------------------------------------------------------------- evaluation


def source_coefficients(nl: Optional[Nonlinearity], basis: SpectralBasis, traj: Trajectory) -> np.ndarray:
    """Coefficients of ``F(U(t))`` on the trajectory's time grid."""
    shape = traj.u_hat.shape
    if nl is None:
        return np.zeros(shape)
    if isinstance(nl, SemilinearPower):
        if nl.mu == 0:
            return np.zeros(shape)
        return forward_transform(basis, nl.grid(inverse_transform(basis, traj.u_hat)))
    if isinstance(nl, GeneralFirstOrder):
        lu = apply_l_power(basis, traj.u_hat, 0.5)
        args = (traj.u_hat, traj.ut_hat, lu)
        return _apply(nl.func, nl.mode, basis, args, shape)
    sv = build_state_vector(basis, traj, nl.l)
    if nl.mode == "pointwise":
        g = lambda c: inverse_transform(basis, c)
        out = nl.func(g(sv.u), [g(c) for c in sv.dts], [g(c) for c in sv.lpows])
        return forward_transform(basis, out)
    return _checked_coeffs(nl.func(sv.u, sv.dts, sv.lpows), shape)


def _apply(func, mode, basis, args, shape):
    if mode == "pointwise":
        out = func(*(inverse_transform(basis, a) for a in args))
        return forward_transform(basis, out)
    if mode == "coefficient":
        return _checked_coeffs(func(*args), shape)
    raise ValidationError(f"unknown evaluator mode {mode!r}")


def _checked_coeffs(out, shape):
    out = np.asarray(out)
    if out.shape != shape:
        out = np.broadcast_to(out, shape).copy()
    return out


def instantaneous_forcing(nl: Optional[Nonlinearity], basis: SpectralBasis, params: DampingParams):
    """``forcing(u_hat, ut_hat) -> F_hat`` for the RK4 oracle.

    Only first-order nonlinearities have an explicit instantaneous form.
    """
    if nl is None:
        return None
    if isinstance(nl, HigherOrder) and nl.l > 1:
        raise UnsupportedError("the RK4 oracle handles nonlinearities of order 1 only")

    def forcing(u, v):
        traj = Trajectory(basis, params, np.zeros(1), np.atleast_2d(u), np.atleast_2d(v))
        return source_coefficients(nl, basis, traj).reshape(np.shape(u))

    return forcing


def _spot_check_zero(nl, basis, params):
    if nl is None or isinstance(nl, SemilinearPower):
        return
    z = np.zeros((1, basis.size))
    traj = Trajectory(basis, params, np.zeros(1), z, z)
    val = source_coefficients(nl, basis, traj)
    if np.max(np.abs(val)) > 1e-14:
        raise ValidationError("nonlinearity must vanish at the zero state",
                              [f"max |F(0)| = {np.max(np.abs(val)):.3e}"])


def _spot_check_pure(nl, basis, traj):
    # evaluators must be pure: two calls on the same state agree exactly
    if nl is None or isinstance(nl, SemilinearPower):
        return
    k = min(len(traj), 4)
    probe = Trajectory(basis, traj.params, traj.times[:k], traj.u_hat[:k], traj.ut_hat[:k])
    a = source_coefficients(nl, basis, probe)
    b = source_coefficients(nl, basis, probe)
    if not np.array_equal(a, b):
        raise ValidationError("nonlinearity evaluator is not pure",
                              ["repeated evaluation on the same state gave different results"])


# ----------------------------------------------------------------------- Picard


@dataclass
class PicardRun:
    """History of a Picard iteration.

    ``increments[k]`` is ``sup_t ||u_{k+1} - u_k||``; ``z_increments`` the same
    difference in the Z-norm; ``contraction_ratios`` the quotient of
    consecutive Z increments (one entry fewer).
    """

    final: Trajectory
    envelope: DecayEnvelope
    order: int
    smallness: SmallnessReport
    iterates: List[Trajectory] = field(default_factory=list)
    z_norms: List[float] = field(default_factory=list)
    increments: List[float] = field(default_factory=list)
    z_increments: List[float] = field(default_factory=list)
    contraction_ratios: List[float] = field(default_factory=list)
    converged: bool = False
    tol: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.increments)

    @property
    def fitted_L(self) -> float:
        """Largest Z-norm over the iterates, the empirical radius of the invariant ball."""
        return max(self.z_norms) if self.z_norms else 0.0

    @property
    def max_ratio(self) -> Optional[float]:
        return max(self.contraction_ratios) if self.contraction_ratios else None


def picard_solve(basis: SpectralBasis, params: DampingParams, nl: Optional[Nonlinearity],
                 u0_hat, u1_hat, times: Sequence[float], tol: Optional[float] = None,
                 max_iter: int = 50, threshold: float = 1e-2, keep_iterates: bool = True,
                 threads: int = 1, check_purity: bool = False) -> PicardRun:
    """Fixed-point iteration ``u_{k+1} = Gamma[u_k]`` from the linear solution.

    Stops once the sup-in-time increment drops below ``tol`` (default
    ``1e-13`` times the size of the linear solution) with the last
    contraction ratio below one.  Raises :class:`NonContractionError` when
    the increment grows three iterations in a row.  ``check_purity``
    re-evaluates a user evaluator on the first iterate and rejects it if the
    two results differ.
    """
    times = _check_grid(times)
    params.check(basis.bottom, basis.name)
    _spot_check_zero(nl, basis, params)
    order = zspace_order(nl)
    sigma = data_sigma(nl)
    report = smallness_check(basis, u0_hat, u1_hat, sigma, threshold)
    envelope = classify_decay(params, basis.bottom, nonlinear=nl is not None)

    linear = solve_linear(basis, params, u0_hat, u1_hat, times)
    linear.meta["iteration"] = 0
    if check_purity:
        _spot_check_pure(nl, basis, linear)
    scale = float(np.max(linear.h_norms())) if len(times) else 0.0
    if tol is None:
        tol = 1e-13 * max(scale, 1e-300)
    run = PicardRun(final=linear, envelope=envelope, order=order, smallness=report, tol=tol)
    if keep_iterates:
        run.iterates.append(linear)
    run.z_norms.append(z_norm(linear, envelope, order))

    cur = linear
    growth = 0
    for k in range(1, max_iter + 1):
        src = source_coefficients(nl, basis, cur)
        J, Jt = duhamel_integral(basis, params, src, times, threads=threads)
        new = linear.with_values(linear.u_hat + J, linear.ut_hat + Jt, source=src)
        new.meta["iteration"] = k
        diff = new.with_values(new.u_hat - cur.u_hat, new.ut_hat - cur.ut_hat,
                               source=src - (cur.source if cur.source is not None else 0))
        inc = float(np.max(h_norm(basis, diff.u_hat)))
        try:
            zinc = z_norm(diff, envelope, order)
        except UnsupportedError:
            zinc = z_norm(diff, envelope, 1)
        if run.z_increments:
            prev = run.z_increments[-1]
            ratio = zinc / prev if prev > 0 else 0.0
            run.contraction_ratios.append(ratio)
        else:
            ratio = None
        if run.increments and inc > run.increments[-1] and inc > tol:
            growth += 1
        else:
            growth = 0
        run.increments.append(inc)
        run.z_increments.append(zinc)
        try:
            run.z_norms.append(z_norm(new, envelope, order))
        except UnsupportedError:
            run.z_norms.append(z_norm(new, envelope, 1))
        if keep_iterates:
            run.iterates.append(new)
        cur = new
        run.final = new
        if not np.all(np.isfinite(new.u_hat)):
            raise NonContractionError("Picard iterate became non-finite", run.contraction_ratios,
                                      run.increments, run)
        if inc == 0 or (inc < tol and (ratio is None or ratio < 1)):
            run.converged = True
            break
        if growth >= 3:
            raise NonContractionError(
                f"Picard increments grew for {growth} consecutive iterations", run.contraction_ratios,
                run.increments, run)
    return run


# --------------------------------------------------------------------- registry


def make_nonlinearity(spec: dict, basis: SpectralBasis) -> Nonlinearity:
    """Build a nonlinearity from a scenario table.

    Recognized ``kind`` values:

    ``power``
        ``mu |u|^{p-1} u``.
    ``damping-power``
        ``mu |u_t|^{p-1} u_t`` (pointwise, first order).
    ``norm-power``
        ``mu e_mode ||U||^p`` with ``||U||`` the Hilbert norm of
        ``(u, u_t, L^{1/2} u)``; a coefficient functional.  With ``l`` set,
        the higher-order tuple is used instead.
    ``python``
        ``target = "module:function"`` imported as a pointwise or
        coefficient evaluator, honouring ``mode`` and ``l``.
    """
    kind = spec.get("kind", "power")
    p = float(spec.get("p", 3.0))
    mu = float(spec.get("mu", 0.0))
    l = spec.get("l")
    if kind == "power":
        return SemilinearPower(p, mu)
    if kind == "damping-power":
        def f(u, ut, lu):
            return mu * np.abs(ut) ** (p - 1) * ut
        return GeneralFirstOrder(f, "pointwise", p, label="damping-power")
    if kind == "norm-power":
        mode = int(spec.get("mode", 0))
        phi = np.zeros(basis.size)
        phi[mode] = 1.0
        if l is None:
            def F(u, ut, lu):
                size = np.sqrt(np.sum(np.abs(u) ** 2 + np.abs(ut) ** 2 + np.abs(lu) ** 2, axis=-1))
                return mu * size[..., None] ** p * phi
            return GeneralFirstOrder(F, "coefficient", p, label="norm-power")

        def Fl(u, dts, lpows):
            sq = np.sum(np.abs(u) ** 2, axis=-1)
            for c in (*dts, *lpows):
                sq = sq + np.sum(np.abs(c) ** 2, axis=-1)
            return mu * np.sqrt(sq)[..., None] ** p * phi
        return HigherOrder(int(l), Fl, "coefficient", p, label="norm-power")
    if kind == "python":
        import importlib

        target = spec.get("target", "")
        modname, _, attr = target.partition(":")
        if not modname or not attr:
            raise ValidationError(f"python nonlinearity needs target 'module:function', got {target!r}")
        func = getattr(importlib.import_module(modname), attr)
        mode = spec.get("mode", "pointwise")
        if l is None:
            return GeneralFirstOrder(func, mode, p, label=target)
        return HigherOrder(int(l), func, mode, p, label=target)
    raise ValidationError(f"unknown nonlinearity kind {kind!r}")
