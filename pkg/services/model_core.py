from __future__ import annotations

from typing import Sequence, Union

import numpy as np

from models.params import AssumptionReport, ModelParams, OdeState
from services.errors import InvalidStateError

StateLike = Union[OdeState, np.ndarray, Sequence[float]]


def state_array(s: StateLike) -> np.ndarray:
    """Coerce a state to a float array whose first axis is (u, v, w)."""
    arr = s.as_array() if isinstance(s, OdeState) else np.asarray(s, dtype=float)
    if arr.shape[:1] != (3,):
        raise InvalidStateError(f"expected a (u, v, w) state, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidStateError(f"state has non-finite components: {arr}")
    return arr


def reaction_terms(p: ModelParams, y: np.ndarray) -> np.ndarray:
    """Unchecked reaction field; `y` has shape (3, ...). Used on hot paths."""
    u, v, w = y[0], y[1], y[2]
    return np.array([
        p.r1 * u * (1.0 - u) - p.a12 * u * v - p.a13 * u * w,
        p.r2 * v * (1.0 - v) + p.a21 * u * v,
        -p.mu * w + p.a31 * u * w,
    ])


def reaction_rhs(p: ModelParams, s: StateLike) -> np.ndarray:
    """Right-hand side of the kinetic system at s.

    Negative components are evaluated formally; non-finite ones raise
    InvalidStateError. Accepts a single state or a stack of shape (3, ...).
    """
    return reaction_terms(p, state_array(s))


def reaction_jacobian(p: ModelParams, s: StateLike) -> np.ndarray:
    y = state_array(s)
    if y.shape != (3,):
        raise InvalidStateError(f"jacobian needs a single state, got shape {y.shape}")
    u, v, w = y
    return np.array([
        [p.r1 - 2.0 * p.r1 * u - p.a12 * v - p.a13 * w, -p.a12 * u, -p.a13 * u],
        [p.a21 * v, p.r2 - 2.0 * p.r2 * v + p.a21 * u, 0.0],
        [p.a31 * w, 0.0, -p.mu + p.a31 * u],
    ])


def h3_value(p: ModelParams) -> float:
    return p.r1 * p.r2 * p.a31 - p.r1 * p.r2 * p.mu - p.a12 * p.a31 * p.r2 - p.a12 * p.a21 * p.mu


def check_assumptions(p: ModelParams) -> AssumptionReport:
    value = h3_value(p)
    return AssumptionReport(h1=p.r1 > p.a12, h2=p.a31 > p.mu, h3=value > 0.0, h3_value=value)


def is_biological(s: StateLike) -> bool:
    """True when every component is finite and nonnegative."""
    arr = s.as_array() if isinstance(s, OdeState) else np.asarray(s, dtype=float)
    return bool(np.all(np.isfinite(arr)) and np.all(arr >= 0.0))
