"""Exception hierarchy shared by all pipeline stages."""


class ClusterEmbedError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(ClusterEmbedError, ValueError):
    """Input data violates a structural requirement (shape, finiteness, ...)."""


class ParameterError(ClusterEmbedError, ValueError):
    """A numeric parameter is outside its admissible range."""


class EmptyResultError(ClusterEmbedError):
    pass


class DegenerateError(ClusterEmbedError, ArithmeticError):
    """A quantity is undefined for the given input (zero variance, constant ranks, ...)."""


class DivergenceError(ClusterEmbedError, ArithmeticError):
    pass


class CalibrationError(ClusterEmbedError):
    pass


class ParseError(ClusterEmbedError, ValueError):
    pass


class StageError(ClusterEmbedError):
    """Wraps an error raised inside a pipeline stage, tagging it with the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
