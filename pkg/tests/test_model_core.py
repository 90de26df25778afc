from __future__ import annotations

import numpy as np
import pytest
from pydantic import ValidationError

from models.params import ModelParams, OdeState
from services.errors import InvalidStateError
from services.model_core import (
    check_assumptions,
    h3_value,
    is_biological,
    reaction_jacobian,
    reaction_rhs,
)


def test_rhs_vanishes_at_positive_equilibrium(params):
    residual = reaction_rhs(params, OdeState(u=0.3, v=1.2, w=0.62))
    assert np.max(np.abs(residual)) <= 1e-10


def test_rhs_at_a_generic_point(params):
    u, v, w = 0.5, 0.5, 0.5
    expected = [
        0.7 * u * (1 - u) - 0.15 * u * v - 0.5 * u * w,
        0.3 * v * (1 - v) + 0.2 * u * v,
        -0.15 * w + 0.5 * u * w,
    ]
    assert np.allclose(reaction_rhs(params, [u, v, w]), expected, atol=1e-15)


def test_rhs_is_vectorized_over_trailing_axes(params, rng):
    states = rng.uniform(0.0, 2.0, size=(3, 7))
    stacked = reaction_rhs(params, states)
    assert stacked.shape == (3, 7)
    for k in range(7):
        assert np.allclose(stacked[:, k], reaction_rhs(params, states[:, k]))


def test_negative_components_are_evaluated_formally(params):
    out = reaction_rhs(params, [-0.1, 0.2, 0.3])
    assert np.all(np.isfinite(out))


@pytest.mark.parametrize("state", [[np.nan, 0.1, 0.1], [0.1, np.inf, 0.1], [0.1, 0.2]])
def test_invalid_states_are_rejected(params, state):
    with pytest.raises(InvalidStateError):
        reaction_rhs(params, state)


def test_jacobian_matches_finite_differences(params, rng):
    h = 1e-6
    for y in rng.uniform(0.0, 2.0, size=(100, 3)):
        J = reaction_jacobian(params, y)
        for k in range(3):
            step = np.zeros(3)
            step[k] = h
            column = (reaction_rhs(params, y + step) - reaction_rhs(params, y - step)) / (2 * h)
            assert np.allclose(J[:, k], column, rtol=1e-6, atol=1e-8), y


def test_jacobian_at_the_trivial_states(params):
    assert np.array_equal(reaction_jacobian(params, [0.0, 0.0, 0.0]), np.diag([0.7, 0.3, -0.15]))
    J = reaction_jacobian(params, [1.0, 0.0, 0.0])
    assert np.allclose(J[0], [-0.7, -0.15, -0.5])
    assert J[1, 1] == pytest.approx(0.5) and J[2, 2] == pytest.approx(0.35)
    assert J[1, 2] == 0.0 and J[2, 1] == 0.0


@pytest.mark.parametrize("k", [0, 1, 2])
def test_coordinate_planes_are_invariant(params, rng, k):
    states = rng.uniform(0.0, 2.0, size=(3, 50))
    states[k] = 0.0
    assert np.all(reaction_rhs(params, states)[k] == 0.0)


def test_jacobian_needs_a_single_state(params):
    with pytest.raises(InvalidStateError):
        reaction_jacobian(params, np.ones((3, 2)))


def test_assumptions_for_reference_parameters(params):
    report = check_assumptions(params)
    assert report.h1 and report.h2 and report.h3
    assert report.h3_value == pytest.approx(0.0465, abs=1e-12)
    assert h3_value(params) == report.h3_value


def test_assumptions_fail_on_the_boundaries(params):
    assert not check_assumptions(params.replace(r1=0.15)).h1
    assert not check_assumptions(params.replace(mu=0.5)).h2


def test_is_biological():
    assert is_biological([0.0, 0.2, 1.0])
    assert not is_biological([-1e-3, 0.2, 1.0])
    assert not is_biological([np.nan, 0.2, 1.0])


@pytest.mark.parametrize("field", ["r1", "mu", "a31", "d"])
def test_params_must_be_positive(params, field):
    with pytest.raises(ValidationError):
        params.replace(**{field: 0.0})


def test_params_reject_nan():
    with pytest.raises(ValidationError):
        ModelParams(r1=float("nan"), r2=0.3, mu=0.15, a12=0.15, a13=0.5, a21=0.2, a31=0.5)


def test_params_are_immutable(params):
    with pytest.raises(ValidationError):
        params.r1 = 1.0


def test_h3_implies_h1_and_h2(rng):
    for r1, r2, mu, a12, a13, a21, a31 in rng.uniform(0.01, 1.0, size=(500, 7)):
        report = check_assumptions(ModelParams(r1=r1, r2=r2, mu=mu, a12=a12, a13=a13, a21=a21, a31=a31))
        if report.h3:
            assert report.h1 and report.h2
        assert report.h3 == (report.h3_value > 0)
