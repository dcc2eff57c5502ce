"""Exception hierarchy for rydex."""


class RydexError(Exception):
    """Base class for all package errors."""


class ConfigError(RydexError, ValueError):
    """Invalid or unknown configuration key or value."""


class NumericalError(RydexError, ArithmeticError):
    """Base class for numerical failures (CLI exit code 3)."""


class ReductionError(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class GridTooCoarse(RydexError, ValueError):
    pass


class PoleHit(NumericalError):
    pass


class GridMismatch(RydexError, ValueError):
    pass


class DegenerateRealization(NumericalError):
    pass


class UnstableStep(NumericalError):
    pass


class BlockLeakage(NumericalError):
    pass


class NonConvergent(NumericalError):
    pass


class IllConditioned(NumericalError):
    pass


class ClippedADC(NumericalError):
    pass
