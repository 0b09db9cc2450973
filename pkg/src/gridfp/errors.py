"""Exception types shared across the package."""


class GridfpError(Exception):
    """Base class for all package errors."""


class SingularMatrix(GridfpError):
    """The bus admittance block could not be inverted."""


class GenerationFailed(GridfpError):
    """Synthetic feeder or dataset generation exhausted its retry budget."""


class ParseError(GridfpError):
    """A data file is structurally malformed."""


class ValidationError(GridfpError):
    """Parsed or constructed data violates a model invariant."""


class DegenerateVoltage(GridfpError):
    """A load-current denominator collapsed below the safe magnitude."""


class Diverged(GridfpError):
    """Training loss became non-finite or exceeded the divergence bound."""
