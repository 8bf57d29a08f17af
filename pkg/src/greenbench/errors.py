"""Exception types shared across the package."""


class GreenbenchError(Exception):
    """Base class for all package errors."""


class ConfigError(GreenbenchError, ValueError):
    """A configuration text could not be parsed or has an invalid field.

    ``line`` is 1-based when known, ``field`` is a dotted path such as
    ``sectors[1].mu``.
    """

    def __init__(self, message, *, line=None, field=None, source=None):
        self.line = line
        self.field = field
        self.source = source
        where = []
        if source:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class InvariantError(GreenbenchError, ValueError):
    """A value violates a documented domain invariant (e.g. payload > 70 kg)."""


class OutOfBoundsError(GreenbenchError, ValueError):
    """A query position lies outside the world rectangle."""


class PhysicsDivergence(GreenbenchError, FloatingPointError):
    """A non-finite value appeared inside the plant update."""


class NoPathError(GreenbenchError):
    """The global planner could not connect start and goal."""


class TrialFailed(GreenbenchError):
    """A benchmark trial ended without completing its task."""

    def __init__(self, cause, log=None):
        self.cause = cause
        self.log = log
        super().__init__(cause)


class ExportError(GreenbenchError, OSError):
    """A result file could not be written."""
