from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dbmlab import ensembles as ens
from dbmlab.eigen import eigenvalues_symmetric, tridiagonal_eigenvalues
from dbmlab.errors import NotSymmetric
from dbmlab.profiles import two_atom, uniform
from dbmlab.rng import RngStream


def test_goe_entry_variances():
    n = 200
    off, diag = [], []
    for k in range(20):
        w = ens.sample_goe(n, RngStream(11, k))
        iu = np.triu_indices(n, 1)
        off.append(w[iu])
        diag.append(np.diag(w))
    assert np.var(np.concatenate(off)) * n == pytest.approx(1.0, abs=0.02)
    assert np.var(np.concatenate(diag)) * n == pytest.approx(2.0, abs=0.1)


def test_time_zero_returns_sorted_profile():
    prof = uniform(30)
    s = ens.sample_deformed(prof, 0.0, RngStream(1, 0))
    np.testing.assert_array_equal(s.eigenvalues, prof.entries)


def test_samples_are_deterministic_per_stream():
    prof = two_atom(40)
    a = ens.sample_deformed(prof, 0.1, RngStream(5, 3)).eigenvalues
    b = ens.sample_deformed(prof, 0.1, RngStream(5, 3)).eigenvalues
    c = ens.sample_deformed(prof, 0.1, RngStream(5, 4)).eigenvalues
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sample_many_is_order_independent():
    prof = uniform(20)
    full = ens.spectra(ens.sample_many(prof, 0.3, 9, 6))
    tail = ens.spectra(ens.sample_many(prof, 0.3, 9, 2, start=4))
    np.testing.assert_array_equal(full[4:], tail)


def test_trace_matches_expectation():
    # E tr H_t = alpha * sum V
    prof = uniform(50)
    t = 0.5
    tr = [ens.sample_deformed(prof, t, RngStream(2, k)).eigenvalues.sum() for k in range(400)]
    sd = np.sqrt(2 * (1 - np.exp(-t))) * np.sqrt(1.0)  # var of trace of sqrt(s) W is 2 s
    assert abs(np.mean(tr) - np.exp(-t / 2) * prof.entries.sum()) < 4 * sd / np.sqrt(400)


def test_goe_spectrum_scaling():
    a = ens.sample_goe_spectrum(30, RngStream(4, 0)).eigenvalues
    b = ens.sample_goe_spectrum(30, RngStream(4, 0), a=0.5, b=2.0).eigenvalues
    np.testing.assert_allclose(b, 0.5 * a + 2.0, atol=1e-14)


def test_empirical_stieltjes_and_counting():
    s = ens.EnsembleSample(np.array([-1.0, 0.0, 2.0]), 0.0, 0)
    z = 0.5 + 0.5j
    ref = np.mean(1 / (np.array([-1.0, 0.0, 2.0]) - z))
    assert abs(ens.empirical_stieltjes(s, z) - ref) < 1e-15
    assert ens.counting_function(s, 0.0) == pytest.approx(2 / 3)


def test_unsorted_sample_rejected():
    with pytest.raises(ValueError):
        ens.EnsembleSample(np.array([1.0, 0.0]), 0.0, 0)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (7, 7), elements=st.floats(-10, 10)))
def test_eigensolver_matches_lapack(a):
    h = (a + a.T) / 2
    ours = eigenvalues_symmetric(h)
    ref = np.linalg.eigvalsh(h)
    scale = max(1.0, np.abs(ref).max())
    assert np.max(np.abs(ours - ref)) <= 1e-12 * scale * 7


def test_eigensolver_larger_matrix():
    h = ens.sample_goe(150, RngStream(0, 0))
    np.testing.assert_allclose(eigenvalues_symmetric(h), np.linalg.eigvalsh(h), atol=1e-12)


def test_tridiagonal_oracle():
    # Toeplitz tridiagonal (2, -1): eigenvalues 2 - 2 cos(k pi / (n + 1))
    n = 12
    ev = tridiagonal_eigenvalues(np.full(n, 2.0), np.full(n - 1, -1.0))
    ref = 2 - 2 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1))
    np.testing.assert_allclose(ev, np.sort(ref), atol=1e-13)


def test_non_symmetric_rejected():
    with pytest.raises(NotSymmetric):
        eigenvalues_symmetric(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(NotSymmetric):
        eigenvalues_symmetric(np.zeros((2, 3)))


def test_rng_stream_validation_and_children():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(0, -1)
    a = RngStream(3, 1).child(1)
    assert a == RngStream(3, 1).child(1)
    assert a != RngStream(3, 1).child(2)
