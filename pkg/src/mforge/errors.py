"""Exception types shared across the package."""


class MforgeError(Exception):
    """Base class for all package errors."""


class ParameterError(MforgeError, ValueError):
    """Invalid argument, shape mismatch or out-of-range parameter."""


class NumericalError(MforgeError, ArithmeticError):
    """A computation produced NaN/inf or hit a degenerate configuration."""


class CapacityError(MforgeError):
    """Input too large for an exact (cubic-cost) computation."""


class DataIOError(MforgeError, OSError):
    """File could not be read, parsed or written."""
