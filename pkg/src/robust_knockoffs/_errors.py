class KnockoffError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(KnockoffError, ValueError):
    """Malformed input: wrong shape, bad value, unknown key."""


class NumericalError(KnockoffError, ArithmeticError):
    """A numerical routine failed (infeasible D, non-finite density, ...)."""
