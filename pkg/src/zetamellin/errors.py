"""Exception types raised across the package."""


class ZetaMellinError(Exception):
    """Base class for all package errors."""


class PoleError(ZetaMellinError, ValueError):
    """Evaluation requested at (or too close to) a pole or singularity."""


class DomainError(ZetaMellinError, ValueError):
    """Arguments outside the documented domain of an operation."""


class EnvelopeError(ZetaMellinError, ValueError):
    """A tail-envelope convergence test failed for the requested abscissa."""


class CoverageError(ZetaMellinError, ValueError):
    """A query reaches outside the range covered by loaded or cached data."""


class DataError(ZetaMellinError, ValueError):
    """Malformed or invariant-violating input data (row-numbered when possible)."""


class CacheError(ZetaMellinError, OSError):
    """I/O or format failure in a persistent cache file."""


class BracketError(ZetaMellinError, ValueError):
    """A root finder's initial bracket does not enclose a sign change."""
