from __future__ import annotations

import numpy as np
import pytest

from models.equilibrium import EquilibriumName, LyapunovVariant, Regime, StabilityVerdict
from models.params import ModelParams
from services.equilibria import (
    analyze,
    characteristic_coefficients,
    classify_equilibrium,
    compute_equilibria,
    get_equilibrium,
    lyapunov_rate,
    lyapunov_V12,
    lyapunov_Vstar,
    lyapunov_variant_audit,
    orbital_derivative,
    regime,
    routh_hurwitz_holds,
)
from services.errors import DomainError, PreconditionError
from services.model_core import check_assumptions, reaction_rhs


def _by_name(p):
    return {e.name: e for e in compute_equilibria(p)}


def _signs(e):
    return sorted(int(np.sign(round(z.real, 12))) for z in e.eigenvalues)


def test_reference_coordinates(params):
    eqs = _by_name(params)
    assert np.allclose(eqs[EquilibriumName.ESTAR].coords.as_array(), [0.3, 1.2, 0.62], atol=1e-12)
    assert np.allclose(eqs[EquilibriumName.E12].coords.as_array(), [0.6875, 1.4583333333, 0.0], atol=1e-9)
    assert np.allclose(eqs[EquilibriumName.E13].coords.as_array(), [0.3, 0.0, 0.98], atol=1e-12)
    assert all(e.exists for e in eqs.values())


def test_existing_equilibria_are_rest_points(params):
    for e in compute_equilibria(params):
        assert np.max(np.abs(reaction_rhs(params, e.coords))) <= 1e-10, e.name


def test_nonexistent_equilibria_are_flagged(params):
    eqs = _by_name(params.replace(r1=0.1))
    assert not eqs[EquilibriumName.E12].exists
    assert not eqs[EquilibriumName.ESTAR].exists
    with pytest.raises(PreconditionError):
        classify_equilibrium(params.replace(r1=0.1), eqs[EquilibriumName.ESTAR])


def test_eigenvalue_sign_patterns(params):
    classified = {e.name: classify_equilibrium(params, e) for e in compute_equilibria(params)}
    assert _signs(classified[EquilibriumName.E0]) == [-1, 1, 1]
    assert _signs(classified[EquilibriumName.E1]) == [-1, 1, 1]
    assert _signs(classified[EquilibriumName.E2]) == [-1, -1, 1]
    assert _signs(classified[EquilibriumName.E12]) == [-1, -1, 1]
    assert _signs(classified[EquilibriumName.E13]) == [-1, -1, 1]
    assert _signs(classified[EquilibriumName.ESTAR]) == [-1, -1, -1]

    assert classified[EquilibriumName.E0].verdict == StabilityVerdict.UNSTABLE
    assert classified[EquilibriumName.E2].verdict == StabilityVerdict.SADDLE
    assert classified[EquilibriumName.ESTAR].verdict == StabilityVerdict.GLOBALLY_STABLE_CLAIMED


def test_positive_equilibrium_has_a_complex_pair(params):
    e = classify_equilibrium(params, get_equilibrium(params, EquilibriumName.ESTAR))
    assert sum(1 for z in e.eigenvalues if abs(z.imag) > 1e-9) == 2
    assert max(z.real for z in e.eigenvalues) < 0


def test_trivial_equilibria_eigenvalues(params):
    e0 = classify_equilibrium(params, get_equilibrium(params, EquilibriumName.E0))
    e1 = classify_equilibrium(params, get_equilibrium(params, EquilibriumName.E1))
    assert np.allclose(sorted(z.real for z in e0.eigenvalues), [-0.15, 0.3, 0.7], atol=1e-12)
    assert np.allclose(sorted(z.real for z in e1.eigenvalues), [-0.7, 0.35, 0.5], atol=1e-12)
    assert all(z.imag == 0.0 for z in e0.eigenvalues + e1.eigenvalues)
    assert e1.verdict == StabilityVerdict.UNSTABLE


def test_sign_patterns_when_prey_cannot_invade(e2_params):
    classified = {e.name: classify_equilibrium(e2_params, e) for e in compute_equilibria(e2_params) if e.exists}
    assert set(classified) == {
        EquilibriumName.E0, EquilibriumName.E1, EquilibriumName.E2, EquilibriumName.E13,
    }
    assert _signs(classified[EquilibriumName.E2]) == [-1, -1, -1]
    assert _signs(classified[EquilibriumName.E13]) == [-1, -1, 1]
    assert _signs(classified[EquilibriumName.E0]) == [-1, 1, 1]
    assert classified[EquilibriumName.E2].verdict == StabilityVerdict.GLOBALLY_STABLE_CLAIMED


def test_sign_patterns_when_the_specialist_cannot_persist(e12_params):
    classified = {e.name: classify_equilibrium(e12_params, e) for e in compute_equilibria(e12_params) if e.exists}
    assert EquilibriumName.ESTAR not in classified
    assert _signs(classified[EquilibriumName.E12]) == [-1, -1, -1]
    assert _signs(classified[EquilibriumName.E2]) == [-1, -1, 1]
    assert _signs(classified[EquilibriumName.E13]) == [-1, -1, 1]
    assert classified[EquilibriumName.E12].verdict == StabilityVerdict.GLOBALLY_STABLE_CLAIMED
    assert classified[EquilibriumName.E2].verdict == StabilityVerdict.SADDLE


def test_regimes_partition_parameter_space(rng):
    for r1, r2, mu, a12, a13, a21, a31 in rng.uniform(0.05, 1.0, size=(300, 7)):
        p = ModelParams(r1=r1, r2=r2, mu=mu, a12=a12, a13=a13, a21=a21, a31=a31)
        u12 = p.r2 * (p.r1 - p.a12) / (p.r1 * p.r2 + p.a12 * p.a21)
        rows = {
            Regime.E2_GAS: p.r1 <= p.a12,
            Regime.E12_GAS: p.r1 > p.a12 and p.mu >= p.a31 * u12,
            Regime.ESTAR_GAS: p.r1 > p.a12 and p.mu < p.a31 * u12,
        }
        assert sum(rows.values()) == 1
        verdict = regime(p)
        assert rows[verdict.regime]
        assert get_equilibrium(p, verdict.attractor).exists


def _random_h3_params(rng, n):
    found = []
    while len(found) < n:
        r1, r2, mu, a12, a13, a21, a31 = rng.uniform(0.05, 1.0, size=7)
        p = ModelParams(r1=r1, r2=r2, mu=mu, a12=a12, a13=a13, a21=a21, a31=a31)
        if check_assumptions(p).h3:
            found.append(p)
    return found


def test_random_h3_parameter_sets_keep_the_sign_patterns(rng):
    for p in _random_h3_params(rng, 200):
        classified = {e.name: classify_equilibrium(p, e) for e in compute_equilibria(p)}
        assert _signs(classified[EquilibriumName.ESTAR]) == [-1, -1, -1]
        assert _signs(classified[EquilibriumName.E12]) == [-1, -1, 1]
        assert _signs(classified[EquilibriumName.E13]) == [-1, -1, 1]
        assert routh_hurwitz_holds(p)
        assert regime(p).regime == Regime.ESTAR_GAS


def test_regime_rows(params, e2_params, e12_params):
    assert regime(params).regime == Regime.ESTAR_GAS
    assert regime(e2_params).regime == Regime.E2_GAS
    assert regime(params.replace(r1=0.15)).regime == Regime.E2_GAS
    assert regime(e12_params).regime == Regime.E12_GAS
    assert "0.34375" in regime(e12_params).witness


def test_characteristic_polynomial_matches_eigenvalues(params):
    a2, a1, a0 = characteristic_coefficients(params)
    e = classify_equilibrium(params, get_equilibrium(params, EquilibriumName.ESTAR))
    for z in e.eigenvalues:
        assert abs(z ** 3 + a2 * z ** 2 + a1 * z + a0) < 1e-10


def test_consistent_vstar_rate_matches_chain_rule(params, rng):
    states = rng.uniform(0.05, 2.0, size=(3, 100))
    chain = orbital_derivative("Vstar", params, states, LyapunovVariant.CONSISTENT)
    assert np.max(np.abs(chain - lyapunov_rate("Vstar", params, states))) <= 1e-8
    assert np.max(chain) <= 1e-10


def test_printed_vstar_coefficient_breaks_the_closed_form(params, rng):
    states = rng.uniform(0.05, 2.0, size=(3, 100))
    chain = orbital_derivative("Vstar", params, states, LyapunovVariant.PRINTED)
    assert np.max(np.abs(chain - lyapunov_rate("Vstar", params, states))) > 1e-3


def test_v12_rate_matches_chain_rule(e12_params, rng):
    states = rng.uniform(0.05, 2.0, size=(3, 100))
    chain = orbital_derivative("V12", e12_params, states)
    assert np.max(np.abs(chain - lyapunov_rate("V12", e12_params, states))) <= 1e-8
    assert np.max(chain) <= 1e-10


def test_variant_audit_reports_both_coefficients(params, rng):
    audits = {(a.function, a.variant): a for a in lyapunov_variant_audit(params, rng, samples=100)}
    assert audits[("Vstar", LyapunovVariant.CONSISTENT)].closed_form_matches
    assert not audits[("Vstar", LyapunovVariant.PRINTED)].closed_form_matches
    assert audits[("V12", None)].closed_form_matches


def test_lyapunov_domains(params):
    with pytest.raises(DomainError):
        lyapunov_Vstar(params, [0.3, 1.2, 0.0])
    with pytest.raises(DomainError):
        lyapunov_V12(params, [0.0, 1.0, 0.1])
    assert np.isfinite(lyapunov_V12(params, [0.5, 1.0, 0.0]))


def test_vstar_is_minimal_at_the_equilibrium(params, rng):
    at_min = lyapunov_Vstar(params, [0.3, 1.2, 0.62])
    others = lyapunov_Vstar(params, rng.uniform(0.05, 2.0, size=(3, 50)))
    assert np.all(others >= at_min)


def test_analyze_report(params, rng):
    report = analyze(params, rng, samples=20)
    assert report.regime.regime == Regime.ESTAR_GAS
    assert len(report.equilibria) == 6
    assert report.routh_hurwitz is True
    assert report.assumptions.h3_value == pytest.approx(0.0465)
    estar = next(e for e in report.equilibria if e.name == EquilibriumName.ESTAR)
    assert len(estar.eigenvalues) == 3
    assert estar.verdict == StabilityVerdict.GLOBALLY_STABLE_CLAIMED


def test_analyze_without_positive_equilibrium(e2_params, rng):
    report = analyze(e2_params, rng, samples=10)
    assert report.regime.regime == Regime.E2_GAS
    assert report.characteristic_coefficients is None
    assert all(a.function != "Vstar" for a in report.lyapunov_audits)
