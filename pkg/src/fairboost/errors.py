"""Exception types raised across the package."""


class FairboostError(Exception):
    """Base class for all package errors."""


class DatasetError(FairboostError, ValueError):
    pass


class UnknownColumnError(DatasetError):
    pass


class UnmappableValueError(DatasetError):
    pass


class MissingValueError(DatasetError):
    pass


class UnseenCategoryError(DatasetError):
    pass


class SplitError(DatasetError):
    pass


class DimensionMismatchError(FairboostError, ValueError):
    pass


class SingleClassError(FairboostError, ValueError):
    pass


class UnfittableError(FairboostError, ValueError):
    """A pre-processor cannot be fit on the given data (e.g. an empty (s, y) cell)."""


class DivergenceError(FairboostError, ArithmeticError):
    def __init__(self, message, iteration=None, step_size=None):
        super().__init__(message)
        self.iteration = iteration
        self.step_size = step_size


class LFRValidationError(FairboostError, ValueError):
    """LFR produced a degenerate transformed dataset (a single label value)."""


class InfeasibleError(FairboostError, ValueError):
    def __init__(self, message, constraint=None):
        super().__init__(message)
        self.constraint = constraint


class DomainTooLargeError(FairboostError, ValueError):
    pass


class ConfigError(FairboostError, ValueError):
    pass
