from __future__ import annotations

from typing import Any, List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from models.params import OdeState


class TrajectoryEvent(BaseModel):
    time: float = Field(..., description="Time at which the event was recorded.")
    tag: str = Field(..., description="Event tag, e.g. 'clamp' or 'near:Estar'.", json_schema_extra={"example": "clamp"})
    detail: str = Field("", description="Free-form detail.")

    model_config = {"frozen": True}


class IntegratorOptions(BaseModel):
    rtol: float = Field(1e-8, ge=1e-12, le=1e-3, description="Relative tolerance.")
    atol: float = Field(1e-10, ge=1e-12, le=1e-3, description="Absolute tolerance.")
    first_step: float = Field(1e-3, gt=0, description="Initial step size.")
    max_step: Optional[float] = Field(None, gt=0, description="Maximum step; defaults to t_end/100.")
    proximity_eps: float = Field(1e-4, gt=0, description="Distance at which equilibrium proximity is logged as an event.")

    model_config = {"frozen": True}


class Trajectory(BaseModel):
    """A time-indexed path in (u, v, w) space.

    `states` has shape (n, 3). `dense` is the piecewise interpolant of the
    accepted steps when the producer had one.
    """

    times: np.ndarray
    states: np.ndarray
    events: List[TrajectoryEvent] = Field(default_factory=list)
    dense: Optional[Any] = Field(default=None, exclude=True, repr=False)

    model_config = {"arbitrary_types_allowed": True, "frozen": True}

    @field_validator("times", "states", mode="before")
    @classmethod
    def _as_float_array(cls, value):
        arr = np.array(value, dtype=float)
        arr.flags.writeable = False
        return arr

    @model_validator(mode="after")
    def _check_shape(self) -> "Trajectory":
        if self.states.ndim != 2 or self.states.shape[1] != 3:
            raise ValueError(f"states must have shape (n, 3), got {self.states.shape}")
        if self.times.shape != (self.states.shape[0],):
            raise ValueError("times and states have different lengths")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(self.states)):
            raise ValueError("states must be finite")
        return self

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def final(self) -> OdeState:
        return OdeState.from_array(self.states[-1])

    def at(self, t) -> np.ndarray:
        """State at time(s) t, from the dense interpolant or linear interpolation."""
        if self.dense is not None:
            out = np.asarray(self.dense(t))
            return out.T if out.ndim == 2 else out
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        cols = [np.interp(t_arr, self.times, self.states[:, k]) for k in range(3)]
        out = np.stack(cols, axis=-1)
        return out[0] if np.ndim(t) == 0 else out


class BoundsReport(BaseModel):
    u_sup_tail: float
    v_sup_tail: float
    combined_tail: float = Field(..., description="sup of u + (a13/a31) w over the tail window.")
    M: float = Field(..., description="r1 + mu.")
    D: float = Field(..., description="mu.")
    u_bound: float = 1.0
    v_bound: float
    combined_bound: float
    slack: float = 1e-3
    window: float = Field(0.2, description="Fraction of the time span treated as the tail.")
    u_ok: bool
    v_ok: bool
    combined_ok: bool

    @property
    def holds(self) -> bool:
        return self.u_ok and self.v_ok and self.combined_ok


class ConvergenceHit(BaseModel):
    name: str = Field(..., description="Name of the captured equilibrium.", json_schema_extra={"example": "Estar"})
    time: float = Field(..., description="Earliest time after which the trajectory stays within eps.")

    model_config = {"frozen": True}


class LyapunovReport(BaseModel):
    function: str = Field(..., description="Name of the monitored function (V12, Vstar or L).")
    variant: Optional[str] = None
    samples: int
    max_increase: float = Field(..., description="Largest positive increment between consecutive samples (0 if none).")
    worst_index: Optional[int] = Field(None, description="Sample index where the largest increment ends.")
    initial_value: float
    final_value: float
    passed: bool = Field(..., description="Every increment is <= 1e-7 * (1 + |V|).")
