"""Exception hierarchy shared by all mpqc modules."""


class MpqcError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(MpqcError, ValueError):
    pass


class KindMismatch(MpqcError, ValueError):
    pass


class ConstraintViolation(MpqcError, ValueError):
    """An input lies outside the admissible box."""


class SolverDiverged(MpqcError):
    pass


class _SolveFailure(MpqcError):
    """Solver finished but a constraint is unmet; ``result`` holds the best iterate."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class InfeasibleTerminalConstraint(_SolveFailure):
    pass


class InfeasibleSetpoint(_SolveFailure):
    pass


class SchemeMismatch(MpqcError, ValueError):
    pass


class NotApplicable(MpqcError):
    pass


class ConfigError(MpqcError, ValueError):
    """Invalid experiment config. ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
