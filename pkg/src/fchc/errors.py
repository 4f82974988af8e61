"""Exception hierarchy.

Errors are grouped into families so that the command line harness can map
each family onto its own exit code.
"""


class FCHCError(Exception):
    """Base class for every error raised by the toolkit."""


class SolverError(FCHCError):
    """Numerical failure inside one of the solvers (exit code 3)."""


class ConfigError(FCHCError):
    """Invalid experiment configuration (exit code 2)."""


class NonZeroMeanRhs(SolverError):
    """Inverse fractional power requested on data with a nonzero mean while
    the operator has a zero eigenvalue."""


class ZeroField(SolverError):
    """The field vanishes after removing its mean."""


class DomainViolation(SolverError):
    """A value left the domain of the convex part of the potential."""

    def __init__(self, value, location=None, message=None):
        self.value = float(value)
        self.location = location
        if message is None:
            message = f"value {self.value!r} outside the potential domain"
            if location is not None:
                message += f" at {location}"
        super().__init__(message)


class NewtonDivergence(SolverError):
    """Newton iteration failed to reach the residual tolerance."""


class SingularStep(SolverError):
    """Per-step linear system is numerically singular."""


class SchemeMismatch(SolverError):
    """Duality pairing requested for a scheme that is not transposed exactly."""


class IdenticalControls(SolverError):
    """Stability probe called with two (numerically) identical controls."""


class NoConvergence(SolverError):
    """Iterative projection did not converge within its iteration cap."""


class LineSearchFailure(SolverError):
    """Armijo backtracking exhausted its halvings."""


class ParseError(ConfigError):
    """Malformed configuration document."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ValidationError(ConfigError):
    """Configuration parsed but violates a modelling assumption.

    ``assumption`` names the violated standing assumption (``"A3"`` for the
    exponents/viscosity, ``"A6"`` for the cost weights and control bounds,
    and so on) so that callers can react to it programmatically.
    """

    def __init__(self, message, field=None, assumption=None):
        self.field = field
        self.assumption = assumption
        if assumption is not None:
            message = f"({assumption}) {message}"
        super().__init__(message)
