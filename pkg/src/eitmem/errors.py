"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2,
numerical failures exit 3, file-parse problems exit 4.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """A parameter record or run configuration violates its invariants."""


class GridTooShortError(ConfigError):
    """The requested time grid truncates the waveform envelope."""


class UndefinedVelocityError(ConfigError):
    """Group velocity is undefined (zero optical depth)."""


class SolverConfigError(ConfigError):
    """Solver resolution violates the step-size/grid contract."""


class NumericalError(RuntimeError):
    """Base class for failures during numerical evaluation."""


class NumericalInstabilityError(NumericalError):
    """Non-finite values appeared while time stepping."""

    def __init__(self, step: int, time: float):
        self.step = step
        self.time = time
        super().__init__(
            f"non-finite field values at step {step} (tau = {time:.6g} internal units)"
        )


class UndefinedEfficiencyError(NumericalError):
    """Storage efficiency is undefined (zero input norm)."""


class UndefinedLikenessError(NumericalError):
    """Waveform likeness is undefined (a packet has zero norm)."""


class UndefinedG2Error(NumericalError):
    """Conditional autocorrelation is undefined (empty coincidence counts)."""

    def __init__(self, counts):
        self.counts = counts
        super().__init__(f"undefined g2: counts (N_G, N_GT, N_GR, N_GTR) = {counts}")


class NoSolutionError(ValueError):
    """The requested inversion has no solution in the model."""


class FitFailureError(NumericalError):
    """Nonlinear fit did not converge; carries the best point found."""

    def __init__(self, message: str, best=None):
        self.best = best
        super().__init__(message)


class InsufficientSignalError(ValueError):
    """Input data carries no usable signal for fitting."""


class TimeTagParseError(ValueError):
    """A time-tag file is malformed; carries the byte offset of the defect."""

    def __init__(self, offset: int, message: str):
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})")


class DataParseError(ValueError):
    """A data CSV is malformed; carries the line number of the defect."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")
