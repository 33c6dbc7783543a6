"""Exception hierarchy shared by all modules."""


class TeamJamError(Exception):
    """Base class for every error raised by this package."""


class DomainError(TeamJamError, ValueError):
    """An argument lies outside the domain of the operation."""


class SingularityError(DomainError):
    """A derivative was requested at a point where it is unbounded."""


class ConvergenceError(TeamJamError, RuntimeError):
    """An iterative method failed to meet its tolerance."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class NashConvergenceError(ConvergenceError):
    """Gauss-Seidel best-response iteration did not settle.

    ``last_profile`` holds the final iterate and ``changes`` the per-sweep
    infinity-norm profile changes, which show whether the iteration was
    oscillating or merely slow.
    """

    def __init__(self, message, last_profile, changes, step=None):
        super().__init__(message, changes=changes, step=step)
        self.last_profile = last_profile
        self.changes = changes
        self.step = step


class ConfigError(TeamJamError, ValueError):
    """Malformed or invalid scenario configuration."""

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"field {key!r}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.key = key
        self.line = line
