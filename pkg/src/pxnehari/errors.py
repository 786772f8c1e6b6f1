"""Exception types shared across the package."""


class PxnehariError(Exception):
    """Base class for all package errors."""


class HypothesisViolation(PxnehariError):
    """A structural hypothesis on the exponents or weights fails."""


class NonConvergence(PxnehariError):
    """An iterative routine exhausted its step budget before reaching tolerance."""


class NoBracket(PxnehariError):
    """No sign change of the fiber derivative inside the sampled window.

    The partially filled profile is attached so callers can still inspect
    the sampled values.
    """

    def __init__(self, message, profile=None):
        super().__init__(message)
        self.profile = profile


class NoProjection(PxnehariError):
    """The requested manifold branch has no fiber root for this direction."""


class BelowFloor(PxnehariError):
    """An interior nodal value sits below the positivity floor."""


class MaxIters(PxnehariError):
    """Iteration cap reached; carries the best iterate seen so far."""

    def __init__(self, message, best=None, trace=None):
        super().__init__(message)
        self.best = best
        self.trace = trace


class AllFail(PxnehariError):
    """Every grid value in a parameter scan failed the acceptance predicate."""


class DegenerateExponents(PxnehariError):
    """Exponent extrema collide; a threshold formula is undefined."""


class SolverFailure(PxnehariError):
    """A solve could not be run as requested."""


class ConfigError(PxnehariError):
    """Bad or missing configuration input."""
