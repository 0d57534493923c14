"""Exception types shared across the package."""


class DeepEdaError(Exception):
    """Base class for all package errors."""


class InvalidInstanceError(DeepEdaError, ValueError):
    """A genome or problem instance violates the problem's structural rules."""


class ParameterError(DeepEdaError, ValueError):
    """An argument is outside its admissible range."""


class ConfigError(ParameterError):
    """An EDA, training or harness configuration is inconsistent."""


class ShapeError(DeepEdaError, ValueError):
    """Array dimensions do not match the model layout."""


class EnumerationLimitError(DeepEdaError, ValueError):
    """A model is too large for exhaustive enumeration."""


class TrainingDivergenceError(DeepEdaError, FloatingPointError):
    """Parameters became non-finite during training."""


class ParseError(DeepEdaError, ValueError):
    """A text file could not be parsed.

    Parameters
    ----------
    message : str
        Description of the problem.
    lineno : int, optional
        1-based line number where parsing failed.
    path : str, optional
        File being parsed.
    """

    def __init__(self, message, lineno=None, path=None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)
