"""Exception types raised across the package."""

from __future__ import annotations


class DBMLabError(Exception):
    """Base class for every error raised by dbmlab."""


class ProfileError(DBMLabError, ValueError):
    """A potential profile is malformed (empty, unsorted, bad scales)."""


class NonConvergence(DBMLabError):
    def __init__(self, message: str, residual: float, energy: float | None = None, eta: float | None = None):
        super().__init__(message)
        self.residual = residual
        self.energy = energy
        self.eta = eta


class IndexOutOfBulk(DBMLabError, IndexError):
    pass


class NotSymmetric(DBMLabError, ValueError):
    pass


class StepCollapse(DBMLabError):
    """Adaptive substepping hit the minimum step without restoring ordering."""

    def __init__(self, message: str, time: float, dt: float):
        super().__init__(message)
        self.time = time
        self.dt = dt


class KernelSingular(DBMLabError):
    pass


class InsufficientSamples(DBMLabError):
    pass


class WindowOutsideBulk(DBMLabError):
    pass


class ConfigInvalid(DBMLabError):
    def __init__(self, field: str, message: str, line: int | None = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{field}: {message}{where}")
        self.field = field
        self.line = line


class ExperimentFailed(DBMLabError):
    """A library error raised while running an experiment, tagged with its kind."""

    def __init__(self, kind: str, cause: Exception):
        super().__init__(f"{kind} experiment failed: {type(cause).__name__}: {cause}")
        self.kind = kind
        self.cause = cause
