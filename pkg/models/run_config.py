from __future__ import annotations

from typing import List, Literal, Optional

from pydantic import BaseModel, Field, field_validator

from models.params import ModelParams


def _split_floats(value):
    if isinstance(value, str):
        return [float(x) for x in value.replace(";", ",").split(",") if x.strip()]
    return value


# -------------------------------
# COMMAND SECTIONS
# -------------------------------
class OdeSection(BaseModel):
    u0: float = Field(0.5, ge=0, description="Initial prey density.")
    v0: float = Field(0.5, ge=0, description="Initial generalist predator density.")
    w0: float = Field(0.5, ge=0, description="Initial specialist predator density.")
    t_end: float = Field(500.0, gt=0, description="Final time.", json_schema_extra={"example": 500.0})
    rtol: float = Field(1e-8, ge=1e-12, le=1e-3)
    atol: float = Field(1e-10, ge=1e-12, le=1e-3)
    eps: float = Field(1e-4, gt=0, description="Sup-norm radius used for the convergence summary.")
    random_starts: int = Field(0, ge=0, description="Extra seeded random positive starts summarised in batch.csv.")

    model_config = {"extra": "forbid"}


class PdeSection(BaseModel):
    scenario: Literal["1", "2", "3", "invasion", "custom"] = Field("1", description="Initial data preset.")
    profile_u: str = Field("", description="Custom u profile, 'a:b:value; a:b:value'.")
    profile_v: str = ""
    profile_w: str = ""
    length: float = Field(10.0, gt=0)
    n_cells: int = Field(200, description="Number of cells.")
    t_end: float = Field(200.0, gt=0)
    output_every: float = Field(1.0, gt=0, description="Snapshot spacing in time units.")
    dt: Optional[float] = Field(None, gt=0, description="Time step; derived from the grid when unset.")
    mode: Literal["explicit", "split"] = "explicit"
    front_speed: bool = False
    theta: float = Field(0.05, gt=0)
    direction: Literal["right", "left"] = "right"
    sweep_d: List[float] = Field(default_factory=list, description="Diffusion coefficients for the w sweep.")

    model_config = {"extra": "forbid"}

    @field_validator("scenario", mode="before")
    @classmethod
    def _scenario_text(cls, value):
        return str(value).strip().lower()

    @field_validator("n_cells")
    @classmethod
    def _not_too_coarse(cls, value: int) -> int:
        if value < 16:
            raise ValueError(f"n_cells={value} gives a grid that is too coarse; use at least 16 cells")
        return value

    @field_validator("sweep_d", mode="before")
    @classmethod
    def _sweep_list(cls, value):
        return _split_floats(value)

    @field_validator("sweep_d")
    @classmethod
    def _sweep_positive(cls, value: List[float]) -> List[float]:
        if any(d <= 0 for d in value):
            raise ValueError("every diffusion coefficient in sweep_d must be positive")
        return value


class WaveSection(BaseModel):
    c: float = Field(1.5, gt=0, description="Wave speed.", json_schema_extra={"example": 1.5})
    eps: float = Field(0.01, description="Radius of the unstable-manifold curve around E1.")
    z_tol: float = Field(1e-15, gt=0)
    horizon: float = Field(500.0, gt=0)
    converge_tol: float = Field(1e-5, gt=0)

    model_config = {"extra": "forbid"}

    @field_validator("eps")
    @classmethod
    def _eps_range(cls, value: float) -> float:
        if not 0 < value <= 0.05:
            raise ValueError(f"eps={value:g} is outside (0, 0.05]; retry with a smaller eps")
        return value


class OutputSection(BaseModel):
    dir: Optional[str] = Field(None, description="Run directory; defaults to <PREDPREY_OUTPUT_DIR>/<command>.")
    svg: bool = Field(True, description="Write SVG plots next to the CSV files.")

    model_config = {"extra": "forbid"}


# -------------------------------
# RUN CONFIG
# -------------------------------
class RunConfig(BaseModel):
    """Fully resolved configuration of one CLI run; written to config.json."""

    params: ModelParams
    seed: int = Field(0, ge=0, description="Seed for every randomized sampling step.")
    d_defaulted: bool = Field(False, description="True when d was absent and set to 1.0.")
    ode: OdeSection = Field(default_factory=OdeSection)
    pde: PdeSection = Field(default_factory=PdeSection)
    wave: WaveSection = Field(default_factory=WaveSection)
    output: OutputSection = Field(default_factory=OutputSection)

    model_config = {
        "extra": "forbid",
        "json_schema_extra": {
            "example": {
                "params": {"r1": 0.7, "r2": 0.3, "mu": 0.15, "a12": 0.15, "a13": 0.5, "a21": 0.2, "a31": 0.5, "d": 1.0},
                "seed": 0,
                "wave": {"c": 1.5, "eps": 0.01},
            }
        },
    }
