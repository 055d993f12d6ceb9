import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bargmann_fpo.errors import DegenerateRates, ParameterOrdering, PoleOfJost
from bargmann_fpo.susy import (
    DarbouxChainSpec, analytic_log_derivative, analytic_wavefunction, build_one_resonance,
    build_two_resonance, exact_phase_shift, free_potential, generic_wronskian_potential,
    jost_function, one_resonance_phase_shift, potential_from_spec, zeta_shift,
)

R_GRID = np.linspace(0.05, 10.0, 100)


def test_ordering_violation_names_the_rule():
    with pytest.raises(ParameterOrdering, match="a2 < a1 < 0"):
        DarbouxChainSpec(((0.1, -2.0),), (1.0, 2.0))
    with pytest.raises(ParameterOrdering):
        DarbouxChainSpec(((-2.0, -0.1),), (1.0, 2.0))


def test_rate_count_and_sign():
    with pytest.raises(ParameterOrdering):
        DarbouxChainSpec(((-0.1, -2.0),), (1.0,))
    with pytest.raises(ParameterOrdering):
        DarbouxChainSpec(((-0.1, -2.0),), (1.0, -2.0))


def test_degenerate_rates():
    with pytest.raises(DegenerateRates):
        DarbouxChainSpec(((-0.1, -2.0),), (1.0, 1.0))


def test_resonance_energies(one_res_spec):
    assert one_res_spec.resonance_energies[0] == pytest.approx(3.99 - 0.4j)
    two = DarbouxChainSpec(((-0.1, -2.0), (-0.08, -3.0)), (0.2, 0.1, 0.08, 0.05))
    assert two.resonance_energies[1] == pytest.approx(8.9936 - 0.48j)


@given(st.floats(-5, -0.01), st.floats(0.01, 5), st.floats(0.05, 5), st.floats(0.05, 5))
def test_text_round_trip(a_odd, gap, b1, b2):
    if abs(b1 - b2) < 1e-6:
        return
    spec = DarbouxChainSpec(((a_odd, a_odd - gap),), (b1, b2))
    assert DarbouxChainSpec.from_text(spec.to_text()) == spec


def test_zeta_shift_definition():
    z = zeta_shift(-0.1, -2.0, 1.0)
    assert math.tanh(z) == pytest.approx(2 * -0.1 / (1 + 0.01 + 4))


def test_one_resonance_matches_wronskian_oracle(one_res, one_res_spec):
    closed = one_res(R_GRID)
    oracle = np.array([generic_wronskian_potential(one_res_spec, r) for r in R_GRID])
    np.testing.assert_allclose(closed, oracle, rtol=1e-8)


def test_two_resonance_matches_wronskian_oracle(two_res):
    r = np.linspace(0.05, 10.0, 25)
    oracle = np.array([generic_wronskian_potential(two_res.spec, x) for x in r])
    np.testing.assert_allclose(two_res(r), oracle, rtol=1e-8)


def test_potential_decays(one_res, two_res):
    assert abs(one_res(30.0)) < 1e-20
    assert abs(two_res(200.0)) < 1e-6


def test_free_chain():
    V = free_potential()
    assert V(1.3) == 0.0
    spec = DarbouxChainSpec()
    assert analytic_wavefunction(spec, 1.7, 0.9) == pytest.approx(math.sin(1.7 * 0.9))
    assert jost_function(spec, 2.0).value == 1
    assert exact_phase_shift(spec, 3.0) == 0.0


def test_jost_zeros_and_poles(one_res_spec):
    for alpha in one_res_spec.alphas:
        assert abs(jost_function(one_res_spec, alpha).value) < 1e-14
    with pytest.raises(PoleOfJost):
        jost_function(one_res_spec, -1j)


@given(st.floats(0.01, 20))
def test_phase_shift_is_jost_phase(k):
    spec = DarbouxChainSpec(((-0.1, -2.0),), (1.0, 2.0))
    S = jost_function(spec, -k).value / jost_function(spec, k).value
    assert abs(S) == pytest.approx(1.0, abs=1e-12)
    d = exact_phase_shift(spec, k)
    assert abs(np.exp(2j * d) - S) < 1e-10


def test_phase_shift_continuous_through_the_resonance(one_res_spec):
    k = np.linspace(0.0, 40.0, 40001)
    d = exact_phase_shift(one_res_spec, k)
    assert d[0] == 0.0
    assert np.max(np.abs(np.diff(d))) < 0.05
    # a narrow resonance raises delta by almost pi across k = 2
    assert d[np.searchsorted(k, 2.3)] - d[np.searchsorted(k, 1.7)] > 2.0


def test_single_arctan_form_agrees(one_res_spec):
    k = np.array([0.1, 0.5, 1.0, 1.414, 1.9, 2.0, 2.1, 3.0, 10.0, 50.0])
    np.testing.assert_allclose(one_resonance_phase_shift(-0.1, -2.0, 1.0, 2.0, k),
                               exact_phase_shift(one_res_spec, k), atol=1e-12)


def test_wavefunction_asymptotic_phase(one_res_spec):
    k, r = 1.3, np.linspace(20, 22, 9)
    psi = np.array([analytic_wavefunction(one_res_spec, k, x) for x in r]).real
    # fit A sin(kr) + B cos(kr) = C sin(kr + delta)
    A, B = np.linalg.lstsq(np.c_[np.sin(k * r), np.cos(k * r)], psi, rcond=None)[0]
    fitted = math.atan2(B, A)
    d = exact_phase_shift(one_res_spec, k)
    assert abs((fitted - d + math.pi / 2) % math.pi - math.pi / 2) < 1e-6


def test_wavefunction_solves_the_equation(one_res, one_res_spec):
    k, r, h = 0.8 - 0.3j, 1.1, 1e-3
    psi = [analytic_wavefunction(one_res_spec, k, r + s * h) for s in (-1, 0, 1)]
    second = (psi[0] - 2 * psi[1] + psi[2]) / h**2
    assert abs(second - (one_res(r) - k * k) * psi[1]) < 1e-4 * abs(psi[1]) * abs(one_res(r))


def test_log_derivative_rejects_alpha(one_res_spec):
    with pytest.raises(ValueError):
        analytic_log_derivative(one_res_spec, one_res_spec.alphas[0], 1.0)


def test_dispatch():
    assert potential_from_spec(DarbouxChainSpec(((-0.1, -2.0),), (1.0, 2.0))).kind == "one_resonance"
    spec = DarbouxChainSpec(((-0.1, -2.0), (-0.08, -3.0)), (0.2, 0.1, 0.08, 0.05))
    assert potential_from_spec(spec).kind == "two_resonance"


def test_csv_export(tmp_path, one_res):
    path = tmp_path / "v.csv"
    one_res.to_csv(path, [0.5, 1.0])
    rows = path.read_text().splitlines()
    assert rows[0] == "r,V" and len(rows) == 3
    assert float(rows[1].split(",")[1]) == pytest.approx(one_res(0.5))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 8.0))
def test_closed_forms_agree_pointwise(r):
    V = build_one_resonance(-0.2, -1.5, 0.7, 1.9)
    assert V(r) == pytest.approx(generic_wronskian_potential(V.spec, r), rel=1e-8)
