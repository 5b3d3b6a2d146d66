"""Spectral solvers for damped wave equations ``u_tt + L u + b u_t + m u = F``.

``L`` is any positive operator given by a truncated orthonormal eigenbasis.
Linear problems are propagated in closed form mode by mode; nonlinear ones
are solved by Picard iteration on the Duhamel formulation.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AssumptionError,
    ConfigurationError,
    DomainError,
    FitError,
    NonContractionError,
    ShapeError,
    SingularNormError,
    SpecwaveError,
    UnsupportedError,
    ValidationError,
)
from .spectral import (  # noqa: E402
    SpectralBasis,
    apply_l_power,
    forward_transform,
    h_norm,
    inverse_transform,
    l_convolution,
    sobolev_norm,
)
from .bases import (  # noqa: E402
    ExplicitOperatorSpec,
    HermiteSpec,
    TorusSpec,
    build_explicit,
    build_harmonic_oscillator,
    build_torus,
)
from .propagator import (  # noqa: E402
    DampingParams,
    DecayEnvelope,
    Regime,
    Trajectory,
    classify_decay,
    energy,
    mode_solution,
    solve_linear,
)
from .nonlinear import (  # noqa: E402
    GeneralFirstOrder,
    HigherOrder,
    SemilinearPower,
    duhamel_integral,
    picard_solve,
    smallness_check,
    z_norm,
)
from .analysis import GNQuery, convolution_bound_probe, fit_envelope, gn_admissible  # noqa: E402
