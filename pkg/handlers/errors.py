"""Exception hierarchy shared by the solvers, the scenario handlers and the CLI.

Every exception carries the process exit code the CLI reports for it.
"""


class DryMateError(Exception):
    """Base class for all DryMate failures."""

    exit_code = 1


class ConfigError(DryMateError):
    """Invalid or inconsistent scenario configuration."""

    exit_code = 2


class GridMismatchError(ConfigError):
    """Two fields or series live on different grids."""


class DomainError(ConfigError):
    """An analytic oracle was evaluated outside its domain."""


class UnsupportedCaseError(ConfigError):
    """The requested closed form is not defined for these parameters."""


class DivergenceError(DryMateError):
    """Numerical blow-up during time stepping or descent.

    Args:
        message (str): Human readable description.
        step (int, optional): Time step index at which the failure was detected.
        trace (DescentTrace, optional): Partial descent trace, if any.
    """

    exit_code = 3

    def __init__(self, message, step=None, trace=None):
        super().__init__(message)
        self.step = step
        self.trace = trace


class SingularStateError(DivergenceError):
    """Vanishing heat capacity at some node."""


class NoControlExistsError(DivergenceError):
    """The frequency-domain control denominator vanishes."""


class OutputError(DryMateError):
    """Result files or trajectory dumps could not be written or read."""

    exit_code = 4
