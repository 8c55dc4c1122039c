"""Exception types raised by the library.

Value-type problems (bad domains, mismatched lengths, empty references)
subclass ValueError; runtime numerical failures subclass RuntimeError so
callers can distinguish configuration mistakes from blown-up computations.
"""


class InvalidDomainError(ValueError):
    """Grid endpoints or point count do not define a valid periodic grid."""


class LengthMismatchError(ValueError):
    """Vector lengths disagree with the grid or with each other."""


class DimensionMismatchError(ValueError):
    """Matrix/vector shapes are incompatible."""


class ZeroReferenceError(ValueError):
    """A relative error was requested against a zero reference."""


class SingularKernelError(ValueError):
    """The dispersive convolution kernel is undefined (eta = 0)."""


class NonfiniteSampleError(ValueError):
    """A library function produced non-finite samples on the grid."""


class ExpressionError(ValueError):
    """A custom library expression failed to parse."""


class ConfigError(ValueError):
    """A run configuration is malformed or contains unknown keys."""


class NonfiniteFieldError(RuntimeError):
    """Propagation produced NaN or Inf field values."""


class NonfiniteGradientError(RuntimeError):
    """A gradient sweep produced NaN or Inf entries."""


class DivergenceError(RuntimeError):
    """Training loss exceeded the divergence guard."""
