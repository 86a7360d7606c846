"""
Exceptions and warnings raised by the toolkit.

Every error carries the process exit code the management commands use.
"""


class ToolkitError(Exception):
    exit_code = 3


class InvalidParameterError(ToolkitError, ValueError):
    """A physical parameter violates its precondition."""
    exit_code = 2


class NoSolutionError(ToolkitError):
    """The requested quantity does not exist for these parameters."""


class ConvergenceError(ToolkitError):
    """An iterative fit stopped at its iteration cap."""


class ToleranceError(ToolkitError):
    """The integrator could not meet the requested tolerance."""


class InvalidTransitionError(ToolkitError, ValueError):
    """A pulse targets a transition the port cannot drive."""
    exit_code = 2


class SingularMatrixError(ToolkitError):
    pass


class ConfigParseError(ToolkitError):
    exit_code = 2

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f'{message} (line {line}, column {column})'
        super().__init__(message)


class ConfigValidationError(ToolkitError):
    exit_code = 2

    def __init__(self, errors):
        self.errors = errors
        self.keys = sorted(_flatten_keys(errors))
        super().__init__(f'Invalid configuration: {", ".join(self.keys)}: {errors}')


class UnknownFigureError(ToolkitError):
    exit_code = 2


class OutputError(ToolkitError):
    exit_code = 4


class DegeneracyWarning(UserWarning):
    pass


class RankDeficiencyWarning(UserWarning):
    pass


class UnresolvedSplittingWarning(UserWarning):
    pass


class CovarianceRepairWarning(UserWarning):
    pass


def _flatten_keys(errors, prefix=''):
    if isinstance(errors, dict):
        for key, value in errors.items():
            dotted = f'{prefix}.{key}' if prefix else str(key)
            if isinstance(value, dict):
                yield from _flatten_keys(value, dotted)
            else:
                yield dotted
    elif prefix:
        yield prefix
