from __future__ import annotations

import numpy as np
import pytest

from models.equilibrium import EquilibriumName, LyapunovVariant
from models.trajectory import IntegratorOptions, Trajectory
from services.equilibria import compute_equilibria
from services.errors import DomainError, InsufficientDataError, InvalidStateError, PreconditionError
from services.ode_integrator import (
    check_bounds,
    detect_convergence,
    integrate,
    monitor_lyapunov,
    random_positive_states,
)


def _existing(p):
    return [e for e in compute_equilibria(p) if e.exists]


def test_reference_run_converges_to_positive_equilibrium(params):
    traj = integrate(params, [0.5, 0.5, 0.5], 500.0)
    assert np.all(traj.states >= 0.0)
    assert np.all(np.diff(traj.times) > 0)
    assert traj.times[-1] == pytest.approx(500.0)
    hit = detect_convergence(traj, _existing(params), 1e-4)
    assert hit is not None and hit.name == EquilibriumName.ESTAR.value
    assert any(e.tag == "near:Estar" for e in traj.events)


def test_dense_output_reproduces_samples(params):
    traj = integrate(params, [0.2, 0.1, 0.08], 50.0)
    picks = traj.times[::7]
    assert np.allclose(traj.at(picks), traj.states[::7], atol=1e-10)
    assert traj.at(10.0).shape == (3,)


def test_solution_agrees_with_tighter_tolerances(params):
    loose = integrate(params, [0.5, 0.5, 0.5], 40.0)
    tight = integrate(params, [0.5, 0.5, 0.5], 40.0, IntegratorOptions(rtol=1e-11, atol=1e-12))
    assert np.allclose(loose.final.as_array(), tight.final.as_array(), atol=1e-6)


@pytest.mark.parametrize("rtol, atol", [(1e-6, 1e-8), (1e-8, 1e-10)])
def test_halving_tolerances_moves_the_end_state_by_less_than_ten_tolerances(params, rtol, atol):
    coarse = integrate(params, [0.5, 0.5, 0.5], 100.0, IntegratorOptions(rtol=rtol, atol=atol))
    fine = integrate(params, [0.5, 0.5, 0.5], 100.0, IntegratorOptions(rtol=rtol / 2, atol=atol / 2))
    end = coarse.final.as_array()
    bound = 10.0 * (rtol * np.max(np.abs(end)) + atol)
    assert np.max(np.abs(end - fine.final.as_array())) < bound


def test_invariant_planes_stay_invariant(params):
    traj = integrate(params, [0.5, 0.5, 0.0], 100.0)
    assert np.all(traj.states[:, 2] == 0.0)


@pytest.mark.parametrize(
    "init, t_end",
    [([-0.1, 0.5, 0.5], 10.0), ([0.5, 0.5, 0.5], 0.0), ([0.5, 0.5], 10.0)],
)
def test_bad_inputs(params, init, t_end):
    with pytest.raises((PreconditionError, InvalidStateError)):
        integrate(params, init, t_end)


def test_bounds_hold_on_reference_run(params):
    report = check_bounds(integrate(params, [1.2, 1.5, 1.4], 300.0), params)
    assert report.holds
    assert report.v_bound == pytest.approx(1.0 + 0.2 / 0.3)
    assert report.combined_bound == pytest.approx(0.85 / 0.15)


def test_bounds_need_ten_samples(params):
    short = Trajectory(times=np.arange(5.0), states=np.full((5, 3), 0.5))
    with pytest.raises(InsufficientDataError):
        check_bounds(short, params)


def test_convergence_needs_positive_eps(params):
    traj = integrate(params, [0.5, 0.5, 0.5], 10.0)
    with pytest.raises(PreconditionError):
        detect_convergence(traj, _existing(params), 0.0)


def test_no_convergence_on_a_short_run(params):
    traj = integrate(params, [0.5, 0.5, 0.5], 5.0)
    assert detect_convergence(traj, _existing(params), 1e-4) is None


def test_vstar_decreases_along_reference_run(params):
    report = monitor_lyapunov(integrate(params, [0.9, 0.3, 1.1], 300.0), "Vstar", params)
    assert report.passed
    assert report.final_value < report.initial_value
    assert report.variant == LyapunovVariant.CONSISTENT.value


def test_monitor_rejects_states_outside_the_domain(params):
    traj = integrate(params, [0.5, 0.5, 0.0], 10.0)
    with pytest.raises(DomainError, match="sample 0"):
        monitor_lyapunov(traj, "Vstar", params)


def test_random_positive_states_are_seeded(rng):
    a = random_positive_states(np.random.default_rng(3), 5)
    b = random_positive_states(np.random.default_rng(3), 5)
    assert a.shape == (5, 3)
    assert np.array_equal(a, b)
    assert np.all((a >= 0.05) & (a < 1.5))


# ------------------------- Acceptance runs -------------------------
@pytest.mark.slow
@pytest.mark.parametrize(
    "fixture, target",
    [("e2_params", EquilibriumName.E2), ("e12_params", EquilibriumName.E12), ("params", EquilibriumName.ESTAR)],
)
def test_each_regime_attracts_random_starts(request, rng, fixture, target):
    p = request.getfixturevalue(fixture)
    for start in random_positive_states(rng, 20):
        traj = integrate(p, start, 5000.0)
        hit = detect_convergence(traj, _existing(p), 1e-4)
        assert hit is not None and hit.name == target.value, start
        assert check_bounds(traj, p).holds
        if target == EquilibriumName.ESTAR:
            assert monitor_lyapunov(traj, "Vstar", p).passed
        elif target == EquilibriumName.E12:
            assert monitor_lyapunov(traj, "V12", p).passed


@pytest.mark.slow
def test_prey_and_specialist_die_out_when_r1_below_a12(e2_params, rng):
    for start in random_positive_states(rng, 10):
        final = integrate(e2_params, start, 5000.0).final
        assert final.u < 1e-5 and final.w < 1e-5


@pytest.mark.slow
def test_prey_decays_algebraically_when_r1_equals_a12(params, rng):
    p = params.replace(r1=0.15)
    for start in random_positive_states(rng, 10):
        final = integrate(p, start, 5000.0).final
        assert final.u < 2e-3 and final.w < 1e-5


@pytest.mark.slow
def test_specialist_dies_out_when_a31_below_mu(w_extinction_params, rng):
    for start in random_positive_states(rng, 10):
        assert integrate(w_extinction_params, start, 5000.0).final.w < 1e-5
