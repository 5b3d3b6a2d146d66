"""Closed-form linear evolution of the damped wave equation, mode by mode.

Each coefficient obeys the damped oscillator

    u'' + b u' + (lambda + m) u = 0,

whose solution is ``u(t) = R0(t) u0 + R1(t) u1``.  With the detuning
``d = lambda + m - b^2/4`` the kernels are evaluated in real arithmetic as

    R1 = e^{-bt/2} S(t),    R0 = e^{-bt/2} (Cd(t) + (b/2) S(t)),

where ``(Cd, S) = (cos wt, sin(wt)/w)``, ``(1, t)`` or ``(cosh kt, sinh(kt)/k)``
for ``d > 0``, ``d = 0`` and ``d < 0`` respectively.  The overdamped branch is
written in terms of the two real exponents so that it neither overflows nor
cancels for large ``t``.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import AssumptionError, DomainError, ShapeError
from .spectral import SpectralBasis, h_norm, sobolev_norm

__all__ = [
    "Regime",
    "DampingParams",
    "ModeKernel",
    "DecayEnvelope",
    "LinearState",
    "Trajectory",
    "CRITICAL_RTOL",
    "regime_of",
    "kernel_parts",
    "mode_kernels",
    "mode_kernels_complex",
    "mode_solution",
    "solve_linear",
    "classify_decay",
    "energy",
    "trajectory_rows",
    "write_trajectory_csv",
]

CRITICAL_RTOL = 1e-9


class Regime(str, enum.Enum):
    OSCILLATORY = "oscillatory"
    CRITICAL = "critical"
    MONOTONE = "monotone"


@dataclass(frozen=True)
class DampingParams:
    """Dissipation ``b > 0`` and mass ``m`` of the equation."""

    b: float
    m: float = 0.0

    def __post_init__(self):
        if not self.b > 0:
            raise AssumptionError(f"b>0 fails: dissipation b={self.b!r}", "b>0")

    def lambda0_plus_m(self, lambda0: float) -> float:
        return lambda0 + self.m

    def check(self, lambda0: float, basis_name: str = "basis") -> None:
        """Raise :class:`AssumptionError` unless ``lambda0 + m > 0``."""
        if not lambda0 + self.m > 0:
            raise AssumptionError(
                f"λ₀+m>0 fails: {basis_name} basis has λ₀={lambda0:g}, given m={self.m:g}",
                "λ₀+m>0",
            )


def _critical_band(b):
    return CRITICAL_RTOL * max(1.0, b * b / 4)


def regime_of(shifted_lambda: float, b: float) -> Regime:
    """Regime of a mode with ``lambda + m = shifted_lambda``."""
    d = shifted_lambda - b * b / 4
    if abs(d) <= _critical_band(b):
        return Regime.CRITICAL
    return Regime.OSCILLATORY if d > 0 else Regime.MONOTONE


def kernel_parts(shifted_lambda, b: float, t):
    """Damped building blocks ``(e^{-bt/2} Cd, e^{-bt/2} S, d)``.

    ``shifted_lambda`` and ``t`` broadcast against each other.
    """
    lam = np.asarray(shifted_lambda, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("mode evolution is defined for t >= 0 only")
    lam, t = np.broadcast_arrays(lam, t)
    half = 0.5 * b
    d = lam - half * half
    crit = np.abs(d) <= _critical_band(b)
    osc = (d > 0) & ~crit
    mono = (d < 0) & ~crit

    ec = np.empty(lam.shape)
    es = np.empty(lam.shape)
    damp = np.exp(-half * t)

    ec[crit] = damp[crit]
    es[crit] = t[crit] * damp[crit]

    if np.any(osc):
        w = np.sqrt(d[osc])
        to = t[osc]
        ec[osc] = damp[osc] * np.cos(w * to)
        es[osc] = damp[osc] * np.sin(w * to) / w

    if np.any(mono):
        k = np.sqrt(-d[mono])
        tm = t[mono]
        slow = np.exp((k - half) * tm)
        # e^{-bt/2} cosh(kt) and e^{-bt/2} sinh(kt)/k through the slow exponent
        far = np.exp(-2.0 * k * tm)
        ec[mono] = 0.5 * slow * (1.0 + far)
        es[mono] = slow * (-np.expm1(-2.0 * k * tm)) / (2.0 * k)

    return ec, es, np.where(crit, 0.0, d)


def mode_kernels(shifted_lambda, b: float, t):
    """``(R0, R1, dR0/dt, dR1/dt)`` at ``lambda + m = shifted_lambda``."""
    ec, es, d = kernel_parts(shifted_lambda, b, t)
    half = 0.5 * b
    r1 = es
    r0 = ec + half * es
    dr1 = ec - half * es
    dr0 = -(d + half * half) * es
    return r0, r1, dr0, dr1


def mode_kernels_complex(shifted_lambda: float, b: float, t):
    """Kernels from the two-exponential representation with complex roots.

    Literal transcription of the coefficient formulas; ill-conditioned near
    the double root and used only as a cross-check of :func:`mode_kernels`.
    """
    t = np.asarray(t, dtype=float)
    s = complex(shifted_lambda - b * b / 4) ** 0.5
    if s == 0:
        e = np.exp(-b / 2 * t)
        return (1 + b / 2 * t) * e, t * e
    plus = np.exp((-b / 2 + 1j * s) * t)
    minus = np.exp((-b / 2 - 1j * s) * t)
    r0 = (b / (4j * s) + 0.5) * plus + (1j * b / (4 * s) + 0.5) * minus
    r1 = 1 / (2j * s) * plus + 1j / (2 * s) * minus
    return r0.real, r1.real


@dataclass(frozen=True)
class ModeKernel:
    """Propagator pair of a single mode."""

    xi: int
    shifted_lambda: float
    b: float
    regime: Regime

    @classmethod
    def for_mode(cls, basis: SpectralBasis, params: DampingParams, xi: int) -> "ModeKernel":
        lam = float(basis.eigenvalues[xi]) + params.m
        return cls(xi, lam, params.b, regime_of(lam, params.b))

    def r0_at(self, t):
        return mode_kernels(self.shifted_lambda, self.b, t)[0]

    def r1_at(self, t):
        return mode_kernels(self.shifted_lambda, self.b, t)[1]


def mode_solution(lam, params: DampingParams, u0, u1, t):
    """Solution ``(u(t), u'(t))`` of one damped mode with eigenvalue ``lam``.

    All arguments broadcast; complex data is handled linearly.
    """
    r0, r1, dr0, dr1 = mode_kernels(np.asarray(lam, dtype=float) + params.m, params.b, t)
    return r0 * u0 + r1 * u1, dr0 * u0 + dr1 * u1


@dataclass(frozen=True)
class DecayEnvelope:
    """Bound shape ``(1+t)^q e^{-gamma t}``.

    ``data_orders`` records the Sobolev orders ``(alpha + 2 beta, alpha - 1 + 2 beta)``
    of the data norms ``||u0||, ||u1||`` that multiply the bound in the linear
    estimate.
    """

    gamma: float
    q: float
    regime: Regime
    nonlinear: bool = False
    data_orders: tuple = (0.0, -1.0)

    def shape(self, t):
        t = np.asarray(t, dtype=float)
        return (1.0 + t) ** self.q * np.exp(-self.gamma * t)

    def weight(self, t):
        """Inverse of :meth:`shape`, the Z-norm time weight."""
        t = np.asarray(t, dtype=float)
        return (1.0 + t) ** (-self.q) * np.exp(self.gamma * t)


def classify_decay(params: DampingParams, lambda0: float, alpha: int = 0, beta: float = 0.0,
                   nonlinear: bool = False) -> DecayEnvelope:
    """Decay envelope predicted for ``||d_t^alpha L^beta u(t)||``.

    The regime is decided by comparing ``b`` with ``2 sqrt(lambda0 + m)``:
    below gives ``(b/2, 0)``, equality ``(b/2, 1)`` and above
    ``(b/2 - sqrt(b^2/4 - lambda0 - m), 0)``.  Nonlinear problems lose an
    extra ``(1+t)^{1/2}``, and ``(1+t)^{3/2}`` in the critical case.
    """
    params.check(lambda0)
    if alpha < 0 or beta < 0:
        raise DomainError(f"need alpha >= 0 and beta >= 0, got ({alpha}, {beta})")
    b = params.b
    shifted = lambda0 + params.m
    regime = regime_of(shifted, b)
    if regime is Regime.OSCILLATORY:
        gamma, q = b / 2, 0.0
    elif regime is Regime.CRITICAL:
        gamma, q = b / 2, 1.0
    else:
        gamma, q = b / 2 - math.sqrt(b * b / 4 - shifted), 0.0
    if nonlinear:
        q = 1.5 if regime is Regime.CRITICAL else q + 0.5
    orders = (alpha + 2.0 * beta, alpha - 1.0 + 2.0 * beta)
    return DecayEnvelope(gamma, q, regime, nonlinear, orders)


@dataclass(frozen=True)
class LinearState:
    u_hat: np.ndarray
    ut_hat: np.ndarray
    t: float


@dataclass(eq=False)
class Trajectory:
    """Time-sampled coefficient trajectory ``(u_hat, d_t u_hat)``.

    ``u_hat`` and ``ut_hat`` have shape ``(T, N)``.  ``source`` optionally
    holds the forcing coefficients ``F_hat`` on the same grid, which is what
    lets higher time derivatives be recovered from the equation.
    Indexing yields :class:`LinearState` snapshots.
    """

    basis: SpectralBasis
    params: DampingParams
    times: np.ndarray
    u_hat: np.ndarray
    ut_hat: np.ndarray
    source: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i) -> LinearState:
        return LinearState(self.u_hat[i], self.ut_hat[i], float(self.times[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def h_norms(self):
        return h_norm(self.basis, self.u_hat)

    def with_values(self, u_hat, ut_hat, source=None) -> "Trajectory":
        return Trajectory(self.basis, self.params, self.times, u_hat, ut_hat, source, dict(self.meta))


def _check_times(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1:
        raise ShapeError("time grid must be one-dimensional")
    if np.any(times < 0):
        raise DomainError("time grid must be nonnegative")
    return times


def solve_linear(basis: SpectralBasis, params: DampingParams, u0_hat, u1_hat,
                 times: Sequence[float]) -> Trajectory:
    """Linear solution ``K0 * u0 + K1 * u1`` sampled on ``times``."""
    params.check(basis.bottom, basis.name)
    u0_hat = np.asarray(u0_hat)
    u1_hat = np.asarray(u1_hat)
    for c in (u0_hat, u1_hat):
        if c.shape != (basis.size,):
            raise ShapeError(f"initial coefficients have shape {c.shape}, expected ({basis.size},)")
    times = _check_times(times)
    r0, r1, dr0, dr1 = mode_kernels(basis.eigenvalues[None, :] + params.m, params.b, times[:, None])
    u = r0 * u0_hat + r1 * u1_hat
    ut = dr0 * u0_hat + dr1 * u1_hat
    return Trajectory(basis, params, times, u, ut)


def energy(basis: SpectralBasis, params: DampingParams, state) -> np.ndarray:
    """``E = (||u_t||^2 + ||L^{1/2} u||^2 + m ||u||^2) / 2``.

    Accepts a :class:`LinearState` or a :class:`Trajectory` (vectorized over
    time).  Signed when ``m < 0``.
    """
    u, ut = state.u_hat, state.ut_hat
    lam = basis.eigenvalues
    return 0.5 * (np.sum(np.abs(ut) ** 2, axis=-1)
                  + np.sum((lam + params.m) * np.abs(u) ** 2, axis=-1))


def fitted_constant(norms, envelope: DecayEnvelope, times) -> float:
    """Smallest ``C`` with ``norms <= C * envelope.shape(times)`` on the grid."""
    norms = np.asarray(norms, dtype=float)
    if norms.size == 0:
        return 0.0
    return float(np.max(norms * envelope.weight(times)))


def trajectory_rows(traj: Trajectory, envelope: DecayEnvelope, constant: Optional[float] = None):
    """Rows ``(t, h_norm, sobolev_norm_s1, energy, envelope_bound)``."""
    hn = traj.h_norms()
    s1 = sobolev_norm(traj.basis, traj.u_hat, 1.0)
    en = energy(traj.basis, traj.params, traj)
    if constant is None:
        constant = fitted_constant(hn, envelope, traj.times)
    bound = constant * envelope.shape(traj.times)
    return [tuple(float(v) for v in row) for row in zip(traj.times, hn, s1, en, bound)]


TRAJECTORY_COLUMNS = ("t", "h_norm", "sobolev_norm_s1", "energy", "envelope_bound")


def write_trajectory_csv(rows, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_COLUMNS)
    for row in rows:
        w.writerow([repr(float(v)) for v in row])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
