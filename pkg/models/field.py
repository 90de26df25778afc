from __future__ import annotations

from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator


class Grid1D(BaseModel):
    """Uniform cell-centered grid on [0, length]."""

    length: float = Field(10.0, gt=0, description="Domain length.", json_schema_extra={"example": 10.0})
    n_cells: int = Field(200, ge=16, description="Number of cells (grids coarser than 16 cells are rejected).")

    model_config = {"frozen": True}

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx


class Field1D(BaseModel):
    """Cell-centered (u, v, w) profiles at one time."""

    grid: Grid1D
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    time: float = 0.0
    clamped: int = Field(0, description="Values below the clamp floor that were reset to 0 in the step producing this field.")

    model_config = {"arbitrary_types_allowed": True, "frozen": True}

    @field_validator("u", "v", "w", mode="before")
    @classmethod
    def _as_float_array(cls, value):
        return np.array(value, dtype=float)

    @model_validator(mode="after")
    def _check_lengths(self) -> "Field1D":
        n = self.grid.n_cells
        for name in ("u", "v", "w"):
            arr = getattr(self, name)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
        return self

    @classmethod
    def uniform(cls, grid: Grid1D, u: float, v: float, w: float, time: float = 0.0) -> "Field1D":
        ones = np.ones(grid.n_cells)
        return cls(grid=grid, u=u * ones, v=v * ones, w=w * ones, time=time)

    def stacked(self) -> np.ndarray:
        """Array of shape (3, n_cells)."""
        return np.stack([self.u, self.v, self.w])


class SpaceTimeRecord(BaseModel):
    grid: Grid1D
    times: np.ndarray = Field(..., repr=False)
    u: np.ndarray = Field(..., repr=False, description="Shape (n_times, n_cells).")
    v: np.ndarray = Field(..., repr=False)
    w: np.ndarray = Field(..., repr=False)
    dt: float
    mode: str
    clamp_count: int = 0
    cell_steps: int = 0

    model_config = {"arbitrary_types_allowed": True, "frozen": True}

    def snapshot(self, i: int) -> Field1D:
        return Field1D(grid=self.grid, u=self.u[i], v=self.v[i], w=self.w[i], time=float(self.times[i]))

    @property
    def terminal(self) -> Field1D:
        return self.snapshot(-1)

    def species(self, name: str) -> np.ndarray:
        if name not in ("u", "v", "w"):
            raise KeyError(name)
        return getattr(self, name)


class FrontTrace(BaseModel):
    times: np.ndarray = Field(..., repr=False)
    positions: np.ndarray = Field(..., repr=False)
    theta: float
    direction: str
    speed: float = Field(..., description="Fitted speed over the last half of the trace.")
    intercept: float
    r_squared: float
    traversal: float = Field(..., description="Fraction of the domain covered by the tracked front.")

    model_config = {"arbitrary_types_allowed": True, "frozen": True}


class Scenario2Check(BaseModel):
    """Comparison of the terminal field with E* (left) and E13 (right)."""
    left_deviation: float
    right_deviation: Optional[float] = None
    tolerance: float
    left_ok: bool
    right_ok: bool


class SweepPoint(BaseModel):
    d: float
    right_mean_w: float


class SweepResult(BaseModel):
    points: List[SweepPoint]
