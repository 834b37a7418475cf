"""Exception types raised across the package."""


class RandinfoError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(RandinfoError, ValueError):
    pass


class HoleTooLarge(RandinfoError, ValueError):
    pass


class GridTooLarge(RandinfoError, ValueError):
    pass


class SinglePoint(RandinfoError, ValueError):
    pass


class Overflow(RandinfoError, OverflowError):
    pass


class PointCountMismatch(RandinfoError, ValueError):
    pass


class NearSingular(RandinfoError, ValueError):
    pass


class NumericalFailure(RandinfoError, RuntimeError):
    pass


class DimensionTooLarge(RandinfoError, ValueError):
    pass


class ZeroNormal(RandinfoError, ValueError):
    pass


class UnsupportedKind(RandinfoError, ValueError):
    pass


class NonConvex(RandinfoError, ValueError):
    pass


class ParameterOutOfRange(RandinfoError, ValueError):
    pass


class UnsupportedRegime(RandinfoError, ValueError):
    pass


class EmptyKernel(RandinfoError, ValueError):
    pass


class Infeasible(RandinfoError, RuntimeError):
    pass


class TooManySubsets(RandinfoError, ValueError):
    pass


class NotEnoughPoints(RandinfoError, ValueError):
    pass


class SingularMoments(RandinfoError, ArithmeticError):
    pass


class ZeroSum(RandinfoError, ValueError):
    pass


class ConfigError(RandinfoError, ValueError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class DegenerateInput(RandinfoError, ValueError):
    pass
