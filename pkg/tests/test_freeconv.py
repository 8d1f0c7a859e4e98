from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dbmlab import freeconv as fcv
from dbmlab.errors import IndexOutOfBulk, NonConvergence
from dbmlab.profiles import two_atom, uniform, zeros


def mp_semicircle(z: complex) -> complex:
    """Independent oracle: (-z + sqrt(z^2 - 4))/2 on the branch with positive imaginary part."""
    zz = mpmath.mpc(z.real, z.imag)
    r = mpmath.sqrt(zz * zz - 4)
    m = (-zz + r) / 2
    if mpmath.im(m) <= 0:
        m = (-zz - r) / 2
    return complex(m)


def test_semicircle_closed_form_on_bulk_grid():
    prof = zeros(10)
    energies = np.linspace(-1.8, 1.8, 100)
    z = energies + 1e-3j
    m = fcv.solve_mfc_continued(prof, 1.0, z, form="T")
    ref = np.array([mp_semicircle(complex(w)) for w in z])
    assert np.max(np.abs(m - ref)) < 1e-10


def test_m_sc_matches_mpmath():
    for z in (0.3 + 0.01j, -1.9 + 0.5j, 3.0 + 1e-4j):
        assert abs(fcv.m_sc(z) - mp_semicircle(z)) < 1e-13


@pytest.mark.parametrize("prof", [uniform(50), two_atom(40), zeros(7)])
def test_time_zero_is_stieltjes_of_V(prof):
    z = np.array([0.1 + 0.5j, -0.7 + 0.05j, 1.2 + 2j])
    for form in ("t", "T"):
        m = fcv.solve_mfc(prof, 0.0, z, form=form)
        assert np.max(np.abs(m - fcv.stieltjes_V(prof, z))) < 1e-12


def test_stieltjes_V_direct_sum():
    prof = uniform(5)
    z = 0.2 + 0.3j
    ref = sum(1.0 / (v - z) for v in prof.entries) / 5
    assert abs(fcv.stieltjes_V(prof, z) - ref) < 1e-15


def _two_atom_cubic_root(z, alpha, s):
    # s^2 m^3 + 2 z s m^2 + (z^2 - alpha^2 + s) m + z = 0, root continued from large eta
    roots = np.roots([s * s, 2 * z * s, z * z - alpha * alpha + s, z])
    return roots


def test_two_atom_matches_cubic():
    prof = two_atom(100)
    t = 0.3
    alpha, s = fcv.coefficients(t)
    for z in (0.95 + 0.05j, 0.0 + 0.2j, -1.1 + 0.01j):
        m = complex(fcv.solve_mfc_continued(prof, t, z))
        roots = _two_atom_cubic_root(z, alpha, s)
        assert np.min(np.abs(roots - m)) < 1e-9
        assert m.imag > 0


def test_t_and_T_forms_are_related_by_scaling():
    prof = uniform(60)
    t = 0.4
    alpha, s = fcv.coefficients(t)
    z = 0.3 + 0.1j
    m_t = fcv.solve_mfc(prof, t, z)
    # H_t = alpha (V + (s/alpha^2)^(1/2) W), so m_t(z) = m_T(z / alpha) / alpha with T = s / alpha^2
    m_T = fcv.solve_mfc(prof, s / alpha ** 2, z / alpha, form="T") / alpha
    assert abs(m_t - m_T) < 1e-11


@settings(max_examples=25, deadline=None)
@given(e=st.floats(-2.5, 2.5), eta=st.floats(1e-2, 5.0), t=st.floats(0.05, 2.0))
def test_solution_is_herglotz_and_bounded(e, eta, t):
    m = complex(fcv.solve_mfc(uniform(30), t, complex(e, eta)))
    assert m.imag > 0
    assert abs(m) <= 1.0 / eta + 1e-12


def test_nonconvergence_reports_point():
    opts = fcv.SolverOpts(max_iter=1)
    with pytest.raises(NonConvergence):
        fcv.solve_mfc(two_atom(20), 0.01, 0.95 + 1e-6j, opts)


def test_spectral_point_requires_upper_half_plane():
    with pytest.raises(ValueError):
        fcv.SpectralPoint(0.0, 0.0)


def test_grid_semicircle_density_and_mass():
    fc = fcv.solve_mfc_grid(zeros(300), 1.0, form="T")
    assert abs(fc.mass - 1.0) < 1e-3
    assert abs(fc.density_at(0.0) - 1 / math.pi) < 1e-4
    ref = fcv.classical_locations_sc(300)
    bulk = np.abs(ref) < 1.5
    assert np.max(np.abs(fc.classical_locations[bulk] - ref[bulk])) < 2e-3


def test_classical_locations_are_quantiles():
    mu = fcv.classical_locations_sc(200)
    np.testing.assert_allclose(fcv.semicircle_cdf(mu[:-1]), np.arange(1, 200) / 200, atol=1e-12)
    assert mu[-1] == 2.0
    np.testing.assert_allclose(fcv.classical_locations_sc(200, 0.5, 1.0), 0.5 * mu + 1.0)


def test_semicircle_law_scaling():
    law = fcv.SemicircleLaw(100, a=0.5, b=1.0)
    z = 1.1 + 0.2j
    assert abs(law.stieltjes(z) - fcv.m_sc((z - 1.0) / 0.5) / 0.5) < 1e-14
    assert law.density_at(1.0) == pytest.approx(1 / (0.5 * math.pi))
    assert law.counting(1.0) == pytest.approx(0.5)


def test_matching_params_align_densities():
    fc = fcv.solve_mfc_grid(uniform(200), 0.2)
    k0 = 100
    mp = fcv.matching_params(fc, k0, 100, 200)
    mu = fcv.classical_locations_sc(200)
    assert mp.a * mu[100] + mp.b == pytest.approx(fc.classical_locations[k0])
    assert fcv.rho_sc(mu[100]) / mp.a == pytest.approx(fc.density_at(fc.classical_locations[k0]))
    with pytest.raises(IndexOutOfBulk):
        fcv.matching_params(fc, 2, 100, 200)


def test_regularity_of_uniform_profile_matches_quadrature():
    prof = uniform(400, window=0.5)
    rep = fcv.check_regularity(prof, 0.5)
    # continuum oracle: Im m of the uniform density 1/2 on [-1, 1] at E + i eta
    e, eta = rep.argmin
    cont = 0.5 * (math.atan((1 - e) / eta) + math.atan((1 + e) / eta))
    assert rep.c_V == pytest.approx(cont, rel=0.05)
    assert rep.passed


def test_gamma_time_derivative_semicircle_is_static():
    # V = 0 in the t-form: H_t = sqrt(1 - e^-t) W, so gamma_i(t) = sqrt(1 - e^-t) mu_i
    fc = fcv.solve_mfc_grid(zeros(200), 1.0)
    i = 140
    mu = fcv.classical_locations_sc(200)[i]
    expected = mu * 0.5 * math.exp(-1.0) / math.sqrt(1 - math.exp(-1.0))
    assert fcv.gamma_time_derivative(fc, i) == pytest.approx(expected, abs=2e-3)
