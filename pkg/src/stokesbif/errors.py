"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: configuration problems exit with 1,
violated mathematical preconditions with 2 and numerical failures with 3.
"""


class StokesBifError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 3


class ConfigError(StokesBifError):
    exit_code = 1


class PreconditionError(StokesBifError, ValueError):
    """A mathematical precondition (admissible R, sign of sigma(0), ...) fails."""

    exit_code = 2


class DomainError(PreconditionError):
    """An argument lies outside the domain of an operation."""


class NumericalError(StokesBifError, RuntimeError):
    exit_code = 3


class ConvergenceError(NumericalError):
    pass


class DegeneracyError(NumericalError):
    """The height function lost strict monotonicity in p (h_p <= 0)."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class SingularInteriorError(NumericalError):
    """The Dirichlet interior block of a linearized operator is not positive definite."""
