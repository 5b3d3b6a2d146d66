"""Method-of-lines RK4 reference integrator for the truncated coefficient system.

This module deliberately shares nothing with :mod:`specwave.propagator`: it
integrates

    u' = v,    v' = -(lambda + m) u - b v + F_hat(u, v)

with the classical fourth-order Runge-Kutta scheme at a fixed step.  The
forcing is a callable on coefficient arrays so that nonlinear terms are
evaluated exactly as the Picard solver evaluates them.
"""
from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from .errors import DomainError

__all__ = ["rk4_modes", "relative_sup_error", "relative_hnorm_discrepancy"]


def rk4_modes(lam, b: float, m: float, u0, u1, times, step: float,
              forcing: Optional[Callable] = None):
    """Integrate independent (or force-coupled) damped modes with RK4.

    Parameters
    ----------
    lam : array_like, shape (N,)
        Eigenvalues; any leading shape broadcasting with ``u0`` works too.
    u0, u1 : array_like
        Initial values and velocities.
    times : array_like, shape (T,)
        Nondecreasing output times beginning at 0.
    step : float
        Maximal RK4 step; each output interval is split into equal substeps.
    forcing : callable, optional
        ``forcing(u, v) -> F_hat`` acting on full coefficient arrays.

    Returns
    -------
    u, v : ndarray, shape (T,) + u0.shape
    """
    lam = np.asarray(lam, dtype=float)
    u0, u1 = np.asarray(u0), np.asarray(u1)
    u = np.array(u0, dtype=np.result_type(u0, u1, float))
    v = np.array(u1, dtype=u.dtype)
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return np.empty((0,) + u.shape), np.empty((0,) + u.shape)
    if times[0] != 0 or np.any(np.diff(times) < 0):
        raise DomainError("oracle times must start at 0 and be nondecreasing")
    shifted = lam + m

    def rhs(u, v):
        acc = -shifted * u - b * v
        if forcing is not None:
            acc = acc + forcing(u, v)
        return v, acc

    out_u = np.empty((times.size,) + u.shape, dtype=u.dtype)
    out_v = np.empty_like(out_u)
    out_u[0], out_v[0] = u, v
    for i in range(1, times.size):
        span = times[i] - times[i - 1]
        n = max(1, math.ceil(span / step - 1e-9)) if span > 0 else 0
        h = span / n if n else 0.0
        for _ in range(n):
            k1u, k1v = rhs(u, v)
            k2u, k2v = rhs(u + 0.5 * h * k1u, v + 0.5 * h * k1v)
            k3u, k3v = rhs(u + 0.5 * h * k2u, v + 0.5 * h * k2v)
            k4u, k4v = rhs(u + h * k3u, v + h * k3v)
            u = u + h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
            v = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        out_u[i], out_v[i] = u, v
    return out_u, out_v


def relative_sup_error(value, reference, axis=0) -> np.ndarray:
    """``max |value - reference| / max |reference|`` along ``axis`` (0 if both vanish)."""
    diff = np.max(np.abs(np.asarray(value) - np.asarray(reference)), axis=axis)
    scale = np.max(np.abs(np.asarray(reference)), axis=axis)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), np.where(diff > 0, np.inf, 0.0))


def relative_hnorm_discrepancy(u_hat, ref_hat) -> float:
    """``sup_t ||u(t) - ref(t)|| / ||ref(t)||`` for coefficient trajectories ``(T, N)``.

    Time samples where the reference vanishes contribute only if the
    candidate does not vanish there as well.
    """
    diff = np.sqrt(np.sum(np.abs(np.asarray(u_hat) - np.asarray(ref_hat)) ** 2, axis=-1))
    ref = np.sqrt(np.sum(np.abs(np.asarray(ref_hat)) ** 2, axis=-1))
    if np.any((ref == 0) & (diff > 0)):
        return math.inf
    mask = ref > 0
    if not np.any(mask):
        return 0.0
    return float(np.max(diff[mask] / ref[mask]))
