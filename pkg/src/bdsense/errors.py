"""Exception types shared across the package."""


class BdsenseError(Exception):
    """Base class for all package-specific errors."""


class InvalidModeError(BdsenseError):
    """Tensor mode index outside the valid range."""


class ShapeError(BdsenseError):
    """Operand dimensions are inconsistent with the requested operation."""


class ConfigError(BdsenseError):
    """Configuration file or parameter set is invalid."""


class IdentifiabilityError(BdsenseError):
    """A dimension inequality required for a unique LS solution is violated."""


class DegenerateInputError(BdsenseError):
    """Input carries no usable signal (e.g. an all-zero vector)."""


class ElevationUnrecoverableError(BdsenseError):
    """Azimuth estimate leaves sin(phi) too small to invert the elevation."""


class NumericalDivergenceError(BdsenseError):
    """An iterative solver produced non-finite values."""


class GainUnrecoverableError(BdsenseError):
    """Too few usable entries remain for the element-wise gain estimate."""
