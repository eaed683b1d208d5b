"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class EPFieldError(Exception):
    """Base class for every error raised by :mod:`epfield`."""


class AlgebraError(EPFieldError, ValueError):
    """Invalid Lie algebra data."""


class AntisymmetryViolation(AlgebraError):
    pass


class JacobiViolation(AlgebraError):
    pass


class DegenerateMetric(AlgebraError):
    pass


class BasisMismatch(AlgebraError):
    pass


class DimensionMismatch(EPFieldError, ValueError):
    pass


class NoMatrixBasis(EPFieldError):
    pass


class LogDomain(EPFieldError, ValueError):
    """Matrix outside the principal-logarithm domain."""


class IndexNotDominated(EPFieldError, ValueError):
    pass


class StencilTooWide(EPFieldError, ValueError):
    pass


class NonFiniteLagrangian(EPFieldError, FloatingPointError):
    def __init__(self, message: str, node: tuple[int, ...] | None = None):
        super().__init__(message)
        self.node = node


class NotFlat(EPFieldError):
    def __init__(self, message: str, defect: float):
        super().__init__(message)
        self.defect = defect


class NotBiInvariant(EPFieldError):
    pass


class LineSearchStalled(EPFieldError):
    pass


class PreconditionError(EPFieldError, ValueError):
    pass


class ConfigError(EPFieldError):
    pass


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass
