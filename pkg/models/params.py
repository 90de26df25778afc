from __future__ import annotations

import numpy as np
from pydantic import BaseModel, Field

# -------------------------------
# MODEL PARAMETERS
# -------------------------------
class ModelParams(BaseModel):
    """Rate constants of the three-species model plus the diffusion coefficient of w."""

    r1: float = Field(..., gt=0, description="Intrinsic growth rate of the prey u (1/time).", json_schema_extra={"example": 0.7})
    r2: float = Field(..., gt=0, description="Intrinsic growth rate of the generalist predator v (1/time).", json_schema_extra={"example": 0.3})
    mu: float = Field(..., gt=0, description="Death rate of the specialist predator w (1/time).", json_schema_extra={"example": 0.15})
    a12: float = Field(..., gt=0, description="Consumption rate of u by v.", json_schema_extra={"example": 0.15})
    a13: float = Field(..., gt=0, description="Consumption rate of u by w.", json_schema_extra={"example": 0.5})
    a21: float = Field(..., gt=0, description="Conversion rate of consumed u into v.", json_schema_extra={"example": 0.2})
    a31: float = Field(..., gt=0, description="Conversion rate of consumed u into w.", json_schema_extra={"example": 0.5})
    d: float = Field(1.0, gt=0, description="Diffusion coefficient of w (length^2/time).", json_schema_extra={"example": 1.0})

    model_config = {
        "frozen": True,
        "allow_inf_nan": False,
        "json_schema_extra": {
            "example": {
                "r1": 0.7, "r2": 0.3, "mu": 0.15, "a12": 0.15,
                "a13": 0.5, "a21": 0.2, "a31": 0.5, "d": 1.0,
            }
        },
    }

    @classmethod
    def reference(cls, d: float = 1.0) -> "ModelParams":
        """The simulation parameter set whose positive equilibrium is (0.3, 1.2, 0.62)."""
        return cls(r1=0.7, r2=0.3, mu=0.15, a12=0.15, a13=0.5, a21=0.2, a31=0.5, d=d)

    def replace(self, **changes: float) -> "ModelParams":
        """Validated copy with some fields changed."""
        return ModelParams(**{**self.model_dump(), **changes})


# -------------------------------
# STATE
# -------------------------------
class OdeState(BaseModel):
    """A point (u, v, w) of the reaction system.

    Components are not forced nonnegative here: integrators and root finders
    may probe slightly negative values. Use `is_biological` to test validity.
    """

    u: float = Field(..., description="Prey density.")
    v: float = Field(..., description="Generalist predator density.")
    w: float = Field(..., description="Specialist predator density.")

    model_config = {"frozen": True}

    @classmethod
    def from_array(cls, y) -> "OdeState":
        u, v, w = (float(x) for x in np.asarray(y, dtype=float).reshape(3))
        return cls(u=u, v=v, w=w)

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.w], dtype=float)


class AssumptionReport(BaseModel):
    h1: bool = Field(..., description="r1 > a12.")
    h2: bool = Field(..., description="a31 > mu.")
    h3: bool = Field(..., description="r1*r2*a31 - r1*r2*mu - a12*a31*r2 - a12*a21*mu > 0.")
    h3_value: float = Field(..., description="Signed value of the H3 expression.")

    model_config = {
        "frozen": True,
        "json_schema_extra": {"example": {"h1": True, "h2": True, "h3": True, "h3_value": 0.0465}},
    }
