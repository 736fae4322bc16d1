"""Exception hierarchy.

Everything raised on purpose by the package derives from :class:`HotInferError`
so callers (and the CLI) can tell modelling failures apart from bugs.
"""


class HotInferError(Exception):
    """Base class for package errors."""


class DimensionMismatch(HotInferError, ValueError):
    pass


class NonFiniteInput(HotInferError, ValueError):
    pass


class DegenerateColumn(HotInferError, ValueError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"constant (zero-variance) column(s): {self.columns}")


class IndexOutOfRange(HotInferError, IndexError):
    pass


class NotConverged(HotInferError, RuntimeError):
    """Solver hit ``max_iter``; ``best`` holds the last iterate."""

    def __init__(self, max_iter, best=None):
        self.max_iter = max_iter
        self.best = best
        super().__init__(f"solver did not converge within {max_iter} iterations")


class RankDeficientFreeSet(HotInferError, ValueError):
    pass


class SigmaCollapse(HotInferError, RuntimeError):
    pass


class AllFitsFailed(HotInferError, RuntimeError):
    pass


class SingularGram(HotInferError, ValueError):
    pass


class RankDeficient(HotInferError, ValueError):
    pass


class AllRankDeficient(HotInferError, ValueError):
    pass


class RankDeficientScreenSet(HotInferError, ValueError):
    pass


class DegenerateDirection(HotInferError, RuntimeError):
    pass


class DegenerateInnerProduct(HotInferError, RuntimeError):
    pass


class InvalidAlpha(HotInferError, ValueError):
    pass


class InvalidPattern(HotInferError, ValueError):
    pass


class FatalSimFailure(HotInferError, RuntimeError):
    pass


class ConfigError(HotInferError, ValueError):
    pass
