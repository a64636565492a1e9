"""Exception types.

Every error carries the CLI exit code it maps to: 1 for usage or
configuration problems, 2 for physics-validation failures, 3 for
numerical failures.
"""


class ClicklessError(Exception):
    exit_code = 1


# -- usage / configuration ------------------------------------------------

class ConfigError(ClicklessError, ValueError):
    exit_code = 1


class DimensionMismatch(ClicklessError, ValueError):
    exit_code = 1


class InvalidParameter(ClicklessError, ValueError):
    exit_code = 1


class IndexOutOfRange(ClicklessError, IndexError):
    exit_code = 1


class InvalidProbability(ClicklessError, ValueError):
    exit_code = 1


class DegenerateSettings(ClicklessError, ValueError):
    exit_code = 1


class InsufficientSettings(ClicklessError, ValueError):
    exit_code = 1


class MissingSigma(ClicklessError, ValueError):
    exit_code = 1


# -- physics validation ----------------------------------------------------

class Unphysical(ClicklessError, ValueError):
    exit_code = 2


class NonzeroDisplacement(ClicklessError, ValueError):
    exit_code = 2


class ZeroNoClick(ClicklessError, ValueError):
    """A setting recorded no no-click events, so P^-2 diverges."""

    exit_code = 2


class InconclusiveEntanglement(ClicklessError):
    """Error bars on the smaller partially-transposed symplectic eigenvalue
    straddle 1. The assembled report is attached as ``report``."""

    exit_code = 2

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


# -- numerical failures ----------------------------------------------------

class NumericalFailure(ClicklessError, ArithmeticError):
    exit_code = 3


class IllConditioned(NumericalFailure):
    pass


class NegativeDiscriminant(NumericalFailure):
    pass


class NoRealRoot(NumericalFailure):
    pass


class NonpositiveDeterminant(NumericalFailure):
    pass


class NonpositiveRoot(NumericalFailure):
    pass


class CutoffTooSmall(NumericalFailure):
    pass
