"""Gagliardo-Nirenberg tables, envelope fitting and the convolution L^1 probe."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .bases import l1_norms
from .errors import FitError, UnsupportedError, ValidationError
from .spectral import SpectralBasis, h_norm, inverse_transform, l_convolution

__all__ = [
    "OperatorFamily",
    "GNQuery",
    "GNVerdict",
    "gn_admissible",
    "gn_critical_index",
    "EnvelopeFit",
    "fit_envelope",
    "ProbeResult",
    "convolution_ratio",
    "convolution_bound_probe",
]


class OperatorFamily(str, enum.Enum):
    HARMONIC_OSCILLATOR = "HarmonicOscillator"
    COMPACT_MANIFOLD_LAPLACIAN = "CompactManifoldLaplacian"
    TWISTED_LAPLACIAN = "TwistedLaplacian"

    @classmethod
    def parse(cls, name) -> "OperatorFamily":
        if isinstance(name, cls):
            return name
        key = str(name).replace("-", "").replace("_", "").lower()
        aliases = {
            "harmonicoscillator": cls.HARMONIC_OSCILLATOR,
            "hermite": cls.HARMONIC_OSCILLATOR,
            "oscillator": cls.HARMONIC_OSCILLATOR,
            "compactmanifoldlaplacian": cls.COMPACT_MANIFOLD_LAPLACIAN,
            "manifold": cls.COMPACT_MANIFOLD_LAPLACIAN,
            "torus": cls.COMPACT_MANIFOLD_LAPLACIAN,
            "twistedlaplacian": cls.TWISTED_LAPLACIAN,
            "twisted": cls.TWISTED_LAPLACIAN,
            "landau": cls.TWISTED_LAPLACIAN,
        }
        try:
            return aliases[key]
        except KeyError:
            raise UnsupportedError(f"unknown operator family {name!r}") from None


@dataclass(frozen=True)
class GNQuery:
    family: OperatorFamily
    n: int
    p: float

    def __post_init__(self):
        object.__setattr__(self, "family", OperatorFamily.parse(self.family))
        issues = []
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            issues.append(f"dimension n must be an integer >= 1, got {self.n!r}")
        if not self.p >= 1:
            issues.append(f"index p must be >= 1, got {self.p!r}")
        if issues:
            raise ValidationError("invalid GN query", issues)


@dataclass(frozen=True)
class GNVerdict:
    admissible: bool
    theta: Optional[float]
    critical_index: float
    exponent_name: str

    def __iter__(self):
        # unpacks as (admissible, theta)
        return iter((self.admissible, self.theta))


def gn_critical_index(family, n: int) -> float:
    """Largest admissible ``p`` (``inf`` when every finite ``p >= 1`` is admissible)."""
    family = OperatorFamily.parse(family)
    if family is OperatorFamily.TWISTED_LAPLACIAN:
        return math.inf if n == 1 else n / (n - 1)
    # the manifold table starts at n = 2; the circle behaves like n = 1 of the oscillator
    return math.inf if n <= 2 else n / (n - 2)


def gn_admissible(query: GNQuery) -> GNVerdict:
    """Table verdict for ``||u||_{2p} <= C ||L^{1/2} u||^theta ||u||^{1-theta}``.

    The interpolation exponent is ``n (p - 1) / (2 p)`` for the
    Laplacian-type families (the Euclidean scaling exponent, also used for
    the oscillator) and ``s = n (p - 1) / p``, the root of
    ``p s (n-1)/n + p (1 - s) = 1``, for the twisted Laplacian.
    """
    n, p = int(query.n), float(query.p)
    pc = gn_critical_index(query.family, n)
    if math.isinf(pc):
        admissible = math.isfinite(p)
    else:
        admissible = p <= pc
    twisted = query.family is OperatorFamily.TWISTED_LAPLACIAN
    name = "s (Hoelder split)" if twisted else "theta (Laplacian scaling)"
    if not admissible:
        return GNVerdict(False, None, pc, name)
    theta = n * (p - 1) / p if twisted else n * (p - 1) / (2 * p)
    if not -1e-12 <= theta <= 1 + 1e-12:
        raise AssertionError(f"interpolation exponent {theta} outside [0, 1] for {query}")
    return GNVerdict(True, min(max(theta, 0.0), 1.0), pc, name)


@dataclass(frozen=True)
class EnvelopeFit:
    gamma_hat: float
    q_hat: float
    c_hat: float
    residual: float
    window: Tuple[float, float]
    samples: int

    def to_dict(self):
        return {"gamma_hat": self.gamma_hat, "q_hat": self.q_hat, "c_hat": self.c_hat,
                "residual": self.residual, "window": list(self.window), "samples": self.samples}


def fit_envelope(times: Sequence[float], values: Sequence[float], tail: float = 0.6,
                 fix_q: Optional[float] = None) -> EnvelopeFit:
    """Least-squares fit of ``log v = log C + q log(1+t) - gamma t`` on the tail window.

    Parameters
    ----------
    times, values : sequence of float
        Samples of a norm trajectory.
    tail : float
        Fraction of samples (the last ones) entering the fit.
    fix_q : float, optional
        Hold the polynomial power fixed and fit only ``C`` and ``gamma``.

    Raises
    ------
    FitError
        Fewer than 8 samples, nonpositive values in the window, or a
        negative fitted rate.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.ndim != 1:
        raise FitError("times and values must be one-dimensional and of equal length")
    if not 0 < tail <= 1:
        raise FitError(f"tail fraction must lie in (0, 1], got {tail}")
    start = int(math.floor((1 - tail) * t.size + 1e-9))
    tw, vw = t[start:], v[start:]
    if tw.size < 8:
        raise FitError(f"need at least 8 samples in the fit window, got {tw.size}")
    if np.any(~np.isfinite(vw)) or np.any(vw <= 0):
        raise FitError("fit window contains nonpositive or non-finite values")
    y = np.log(vw)
    if fix_q is None:
        A = np.column_stack([np.ones_like(tw), np.log1p(tw), -tw])
    else:
        A = np.column_stack([np.ones_like(tw), -tw])
        y = y - fix_q * np.log1p(tw)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    if fix_q is None:
        logc, q, gamma = coef
    else:
        (logc, gamma), q = coef, fix_q
    if gamma < 0:
        raise FitError(f"fitted decay rate {gamma:.4g} is negative (growing data)")
    return EnvelopeFit(float(gamma), float(q), float(math.exp(logc)), resid,
                       (float(tw[0]), float(tw[-1])), int(tw.size))


@dataclass(frozen=True)
class ProbeResult:
    max_ratio: float
    sup_e_l1: float
    trials: int
    seed: int

    def to_dict(self):
        return {"max_ratio": self.max_ratio, "sup_e_l1": self.sup_e_l1,
                "trials": self.trials, "seed": self.seed}


def convolution_ratio(basis: SpectralBasis, f, g) -> np.ndarray:
    """``||f *_L g||_{L^1} / (||f|| ||g||)`` by quadrature; 0 where either factor vanishes.

    ``f`` and ``g`` are coefficient arrays and may carry a leading batch axis.
    """
    conv = inverse_transform(basis, l_convolution(basis, f, g))
    l1 = np.abs(conv) @ basis.weights
    den = h_norm(basis, f) * h_norm(basis, g)
    return np.where(den > 0, l1 / np.where(den > 0, den, 1.0), 0.0)


def convolution_bound_probe(basis: SpectralBasis, trials: int = 1000, seed: int = 0) -> ProbeResult:
    """Empirical ``max ||f *_L g||_{L^1} / (||f|| ||g||)`` over random basis-span pairs.

    Coefficients are standard normal (complex when the basis is complex),
    drawn from one generator seeded by ``seed``.  The companion quantity
    ``sup_xi ||e_xi||_{L^1}`` bounds the ratio by the triangle and
    Cauchy-Schwarz inequalities.
    """
    if np.any(basis.weights <= 0):
        raise ValidationError("L1 probe needs positive quadrature weights")
    sup_l1 = float(np.max(l1_norms(basis)))
    if trials <= 0:
        return ProbeResult(0.0, sup_l1, 0, int(seed))
    rng = np.random.default_rng(seed)
    shape = (trials, basis.size)
    f = rng.standard_normal(shape)
    g = rng.standard_normal(shape)
    if not basis.is_real:
        f = f + 1j * rng.standard_normal(shape)
        g = g + 1j * rng.standard_normal(shape)
    ratio = convolution_ratio(basis, f, g)
    return ProbeResult(float(np.max(ratio)), sup_l1, int(trials), int(seed))
