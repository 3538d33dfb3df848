"""Exception hierarchy; the CLI maps each class to an exit code."""


class LocalGMEError(Exception):
    exit_code = 1


class ArgumentError(LocalGMEError, ValueError):
    """Input outside the domain of an operation."""

    exit_code = 2


class SizeError(LocalGMEError):
    """A matrix or vertex set would exceed its configured cap."""

    exit_code = 3


class DegenerateError(LocalGMEError):
    """A map or filter annihilated the state (zero normalization)."""

    exit_code = 3


class NoSolutionError(ArgumentError):
    pass


class SolverError(LocalGMEError):
    """The LP solver failed to reach a trustworthy optimum."""

    exit_code = 4
