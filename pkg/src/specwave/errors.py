"""Exception hierarchy shared by all solver modules."""


class SpecwaveError(Exception):
    """Base class for every error raised by specwave."""


class ShapeError(SpecwaveError, ValueError):
    """Array shape does not match the basis (nodes or modes)."""


class SingularNormError(SpecwaveError, ValueError):
    """Negative power requested on a zero eigenvalue carrying a nonzero coefficient."""


class ValidationError(SpecwaveError, ValueError):
    """A basis or scenario violates its declared invariants.

    ``issues`` lists every offending entry, not only the first one found.
    """

    def __init__(self, message, issues=()):
        self.issues = list(issues)
        if self.issues:
            message = message + ": " + "; ".join(self.issues)
        super().__init__(message)


class ConfigurationError(ValidationError):
    """Basis constructor parameters are inconsistent (e.g. aliasing)."""


class AssumptionError(ValidationError):
    """A standing assumption of the theory fails, e.g. ``lambda0 + m > 0``.

    ``assumption`` holds the short name of the violated condition so that
    callers (the CLI in particular) can report it in machine-readable form.
    """

    def __init__(self, message, assumption):
        self.assumption = assumption
        super().__init__(message)


class DomainError(SpecwaveError, ValueError):
    """Argument outside the domain of an operation (e.g. negative time)."""


class FitError(SpecwaveError, ValueError):
    """Envelope fit cannot be performed on the given samples."""


class NonContractionError(SpecwaveError, RuntimeError):
    """Picard iteration increments grew for several consecutive steps."""

    def __init__(self, message, ratios=(), increments=(), run=None):
        self.ratios = list(ratios)
        self.increments = list(increments)
        self.run = run
        super().__init__(message)


class UnsupportedError(SpecwaveError, NotImplementedError):
    """The requested feature or family is outside what is implemented."""
