import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import linalg

from bargmann_fpo.continuum import TruncatedPotential, cutoff_phase_shift, resonance_sheet_momentum
from bargmann_fpo.errors import MisalignedRadius
from bargmann_fpo.lattice import (
    LatticeModel, corner_term, discretize, dispersion_k, effective_hamiltonian, eigenpair_near,
    eigenvalues_at, log_determinant, phase_shift_sweep, solve_scattering,
)
from bargmann_fpo.susy import exact_phase_shift, free_potential


def test_discretize_sizes(one_res, one_res_model):
    m = one_res_model
    assert m.N == 500 and m.t == pytest.approx(10000.0)
    assert m.t * m.a**2 == pytest.approx(1.0, abs=1e-12)
    assert m.U[0] == pytest.approx(one_res(0.01), rel=1e-14)
    assert m.U[-1] == 0.0


def test_discretize_free():
    m = discretize(TruncatedPotential(free_potential(), 2.0), 0.05)
    assert not m.U.any()


def test_lead_beyond_cutoff(one_res):
    m = discretize(TruncatedPotential(one_res, 2.0), 0.01, R=3.0)
    assert m.N == 300
    assert not m.U[m.r >= 2.0].any()


def test_misaligned_radius(one_res):
    with pytest.raises(MisalignedRadius):
        discretize(TruncatedPotential(one_res, 5.0), 0.03)


def test_dispersion_examples():
    m = LatticeModel(0.01, np.zeros(10), 0.1)
    assert dispersion_k(2 * m.t, m) * m.a == pytest.approx(math.pi / 2)
    assert dispersion_k(1e-4, m) == pytest.approx(0.01, rel=1e-8)
    E = 3.99 - 0.4j
    assert abs(dispersion_k(E, m) - resonance_sheet_momentum(E)) < m.a**2 * abs(E)


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 0))
def test_dispersion_inverts(re, im):
    m = LatticeModel(0.01, np.zeros(3), 0.01)
    E = complex(re, im)
    k = dispersion_k(E, m)
    assert k.imag <= 1e-12
    assert abs(2 * m.t * (1 - np.cos(k * m.a)) - E) < 1e-8 * max(1, abs(E))


def test_complex_symmetric_and_decaying(one_res_model):
    H = effective_hamiltonian(one_res_model, 3.0).dense()
    assert np.array_equal(H, H.T)
    assert corner_term(3.0, one_res_model).imag < 0


def test_free_lattice_is_transparent():
    m = discretize(TruncatedPotential(free_potential(), 5.0), 0.01)
    for E in (0.3, 4.0, 150.0, 19000.0):
        r = solve_scattering(m, E)
        assert abs(r.S - 1) < 1e-10 and abs(r.delta) < 1e-10
    np.testing.assert_allclose(phase_shift_sweep(m, np.linspace(0.1, 39000, 500)), 0, atol=1e-9)


def test_unitarity_two_resonance(two_res):
    m = discretize(TruncatedPotential(two_res, 5.0), 0.01)
    rng = np.random.default_rng(7)
    for E in rng.uniform(0, m.band_top, 100):
        assert abs(abs(solve_scattering(m, E).S) - 1) < 1e-10


def test_band_check(one_res_model):
    with pytest.raises(ValueError):
        solve_scattering(one_res_model, -1.0)


def test_sweep_phase_matches_driven_solution(one_res_model):
    for E in (0.5, 3.9, 4.1, 250.0, 30000.0):
        d = phase_shift_sweep(one_res_model, E)
        S = solve_scattering(one_res_model, E).S
        assert abs(np.exp(2j * d) - S) < 1e-9


def test_sweep_near_threshold(one_res_model):
    assert abs(phase_shift_sweep(one_res_model, 1e-6)) < 1e-2


def test_log_determinant_1x1():
    m = LatticeModel(0.5, np.zeros(1), 0.5)
    E = 1.0 + 0.3j
    k = dispersion_k(E, m)
    D = E - 2 * m.t + m.t * np.exp(1j * k * m.a)
    mag, ph = log_determinant(m, E)
    assert mag == pytest.approx(math.log(abs(D)), rel=1e-12)
    assert ph == pytest.approx(np.angle(D), abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 100), st.integers(0, 2**32 - 1),
       st.complex_numbers(max_magnitude=50, allow_nan=False, allow_infinity=False))
def test_log_determinant_matches_dense_lu(n, seed, E):
    rng = np.random.default_rng(seed)
    m = LatticeModel(0.1, rng.uniform(-1, 1, n), 0.1)
    A = E * np.eye(n) - effective_hamiltonian(m, E).dense()
    lu, piv = linalg.lu_factor(A)
    diag = np.diag(lu)
    sign = np.prod(diag / np.abs(diag)) * (-1) ** np.sum(piv != np.arange(n))
    mag, ph = log_determinant(m, E)
    assert mag == pytest.approx(np.sum(np.log(np.abs(diag))), rel=1e-8, abs=1e-8)
    assert abs(np.exp(1j * ph) - sign) < 1e-8


def test_log_determinant_example_n50():
    rng = np.random.default_rng(50)
    m = LatticeModel(0.1, rng.uniform(-1, 1, 50), 0.1)
    E = 1 + 0.3j
    sign, ld = np.linalg.slogdet(E * np.eye(50) - effective_hamiltonian(m, E).dense())
    mag, ph = log_determinant(m, E)
    assert abs(mag - ld) < 1e-8 * abs(ld) and abs(np.exp(1j * ph) - sign) < 1e-8


def test_small_spectrum_matches_characteristic_polynomial():
    m = LatticeModel(0.5, np.zeros(4), 2.0)
    E = 1.3
    H = effective_hamiltonian(m, E).dense()
    roots = np.roots(np.poly(H))
    got = eigenvalues_at(m, E).eigenvalues
    for z in roots:
        assert np.min(np.abs(got - z)) < 1e-9 * m.t


def test_trace_identity_and_biorthogonality(one_res_model):
    E = 3.99
    eps = eigenvalues_at(one_res_model, E)
    k = dispersion_k(E, one_res_model)
    t = one_res_model.t
    trace = np.sum(one_res_model.U + 2 * t) - t * np.exp(1j * k * one_res_model.a)
    assert abs(eps.eigenvalues.sum() - trace) < 1e-8 * abs(trace)
    assert not eps.defective
    gram = eps.eigenvectors.T @ eps.eigenvectors
    assert np.max(np.abs(gram - np.eye(len(gram)))) < 1e-8
    assert np.min(np.abs(eps.eigenvalues.real - E)) < 0.1
    assert np.all(eps.widths >= -1e-9)


def test_eigenpair_near_agrees_with_dense(one_res_model):
    z, v = eigenpair_near(one_res_model, 3.99, 3.98 - 0.4j)
    eps = eigenvalues_at(one_res_model, 3.99)
    j = np.argmin(np.abs(eps.eigenvalues - z))
    assert abs(eps.eigenvalues[j] - z) < 1e-8
    assert abs(abs(v @ eps.eigenvectors[:, j]) - 1) < 1e-8


def test_continuum_convergence(one_res):
    """Halving a cuts the gap to the truncated-continuum phase by ~4."""
    tp = TruncatedPotential(one_res, 5.0)
    E = np.array([1.0, 3.9, 4.05, 10.0, 50.0, 500.0])
    target = cutoff_phase_shift(tp, np.sqrt(E))
    err = [np.abs(phase_shift_sweep(discretize(tp, a), E) - target) for a in (0.01, 0.005)]
    order = np.log2(err[0] / err[1])
    assert np.all(order > 1.8), order
