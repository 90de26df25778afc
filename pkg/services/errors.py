from __future__ import annotations

from typing import Any, Optional


class PredPreyError(Exception):
    """Base class for every error raised by the model and simulation services."""


class InvalidStateError(PredPreyError):
    """A state vector contains NaN or infinite components."""


class DomainError(PredPreyError):
    """A function was evaluated outside its domain (e.g. log of a nonpositive density)."""


class PreconditionError(PredPreyError):
    """An operation was called with inputs violating its documented preconditions."""


class InsufficientDataError(PredPreyError):
    """Too few samples to compute the requested statistic."""


class StiffnessError(PredPreyError):
    """The adaptive integrator could not make progress; carries the partial trajectory."""

    def __init__(self, message: str, partial: Optional[Any] = None):
        super().__init__(message)
        self.partial = partial


class StepSizeError(PredPreyError):
    """The explicit diffusion step violates the stability bound."""


class InsufficientTraceError(PredPreyError):
    """A level-crossing front could not be tracked over enough snapshots."""


class WaveConfigurationError(PredPreyError):
    """The shooting setup cannot produce the exit dichotomy (usually eps too large)."""


class ShootingError(PredPreyError):
    """Shooting produced a verdict that the wedge geometry rules out."""


class SubcriticalWaveError(PredPreyError):
    """Requested wave speed does not exceed the minimal speed."""

    def __init__(self, c: float, c_star: float, lambda2: complex, lambda3: complex):
        super().__init__(
            f"wave speed c={c:g} does not exceed the minimal speed c_star={c_star:.6f}; "
            f"unstable eigenvalues lambda2={lambda2:.6g}, lambda3={lambda3:.6g} are not real and "
            f"distinct, so no positive traveling wave exists"
        )
        self.c = c
        self.c_star = c_star
        self.lambda2 = lambda2
        self.lambda3 = lambda3


class ConfigError(PredPreyError):
    """Run configuration could not be parsed or validated."""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None, source: Optional[str] = None):
        location = ""
        if source is not None:
            location = f"{source}:{line}: " if line is not None else f"{source}: "
        elif line is not None:
            location = f"line {line}: "
        prefix = f"key '{key}': " if key else ""
        super().__init__(f"{location}{prefix}{message}")
        self.key = key
        self.line = line
        self.source = source
