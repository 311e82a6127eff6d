"""Exceptions shared across the package."""


class CapExceededError(RuntimeError):
    """An exact computation would exceed a configured size cap.

    Callers that hit this on a lattice or transfer-matrix build are expected
    to fall back to the Monte Carlo path instead of retrying.
    """


class DegenerateError(ArithmeticError):
    """A normalizing denominator underflowed to zero."""


class SupportError(ValueError):
    """A target distribution puts mass where the proposal has none."""


class IterationCapError(RuntimeError):
    """Rejection sampling exhausted its attempt budget."""


class UnderpoweredRunError(RuntimeError):
    """A Monte Carlo run's standard error is too large to resolve the bias."""
