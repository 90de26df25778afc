from __future__ import annotations

import numpy as np
import pytest

from models.params import ModelParams


@pytest.fixture
def params() -> ModelParams:
    """Simulation parameter set; E* = (0.3, 1.2, 0.62)."""
    return ModelParams.reference()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def e2_params(params) -> ModelParams:
    """r1 < a12: u and w die out, v -> 1."""
    return params.replace(r1=0.1)


@pytest.fixture
def e12_params(params) -> ModelParams:
    """r1 > a12 and mu >= a31*u12 (0.4 >= 0.34375): w dies out."""
    return params.replace(mu=0.4)


@pytest.fixture
def w_extinction_params(params) -> ModelParams:
    """a31 <= mu."""
    return params.replace(mu=0.6)


REFERENCE_CONFIG = """\
# reference run
r1=0.7
r2=0.3
mu=0.15
a12=0.15
a13=0.5
a21=0.2
a31=0.5
d=1.0
seed=7
"""


@pytest.fixture
def reference_config(tmp_path):
    path = tmp_path / "run.env"
    path.write_text(REFERENCE_CONFIG, encoding="utf-8")
    return path
