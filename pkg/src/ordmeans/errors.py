"""Exceptions raised by the estimation, testing and ingestion code."""


class OrdMeansError(Exception):
    """Base class for all library errors."""


class InvalidInput(OrdMeansError, ValueError):
    """Input data or configuration violates a documented precondition."""


class DegenerateVariance(OrdMeansError):
    """A level has zero within-level variance where a fitter divides by it."""


class Unsupported(OrdMeansError, NotImplementedError):
    """The requested operation is outside the supported dimension or mode."""
