from __future__ import annotations

import numpy as np
import pytest
from scipy.linalg import expm

from dbmlab import dbm, parabolic as P
from dbmlab.ensembles import sample_deformed, sample_goe_spectrum
from dbmlab.errors import KernelSingular
from dbmlab.profiles import uniform
from dbmlab.rng import RngStream


def _static_kernel(K=6, snapshots=4, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.arange(-K, K + 1)
    a = np.cumsum(rng.uniform(0.5, 1.5, labels.size))
    b = np.cumsum(rng.uniform(0.5, 1.5, labels.size))
    times = np.linspace(0.0, 3.0, snapshots)
    return P.ParabolicKernel(times, np.tile(a, (snapshots, 1)), np.tile(b, (snapshots, 1)), labels)


@pytest.fixture(scope="module")
def coupled_run():
    n = 120
    x0 = sample_deformed(uniform(n), 0.2, RngStream(1, 0)).eigenvalues
    y0 = sample_goe_spectrum(n, RngStream(1, 1), a=0.6).eigenvalues
    return dbm.integrate_coupled(x0, y0, 60, 60, 4.0 / n, 0.02 / n, RngStream(1, 2), dbm.DriftOpts(record_every=5))


def test_constant_kernel_matches_matrix_exponential():
    ker = _static_kernel()
    U = P.propagator(ker, 0.0, 3.0)
    ref = expm(-3.0 * ker.laplacian(0))
    # Crank-Nicolson with ds * max L_jj <= 0.5 and repeated squaring: second order in ds
    assert np.max(np.abs(U.matrix - ref)) < 5e-3
    fine = P.propagator(ker, 0.0, 3.0, step_factor=0.05)
    assert np.max(np.abs(fine.matrix - ref)) < np.max(np.abs(U.matrix - ref)) / 10


def test_stochastic_matrix_properties(coupled_run):
    ker = P.ParabolicKernel.from_coupled(coupled_run, 16)
    U = P.propagator(ker, ker.start, ker.end)
    assert U.row_sum_error() < 1e-10
    assert U.min_entry() >= -1e-15
    assert np.abs(U.matrix).sum(axis=1).max() <= 1 + 1e-10
    ident = P.propagator(ker, 1.0, 1.0)
    np.testing.assert_array_equal(ident.matrix, np.eye(ker.size))


def test_flow_contracts_sup_norm_and_keeps_constants(coupled_run):
    ker = P.ParabolicKernel.from_coupled(coupled_run, 16)
    v0 = np.random.default_rng(0).normal(size=ker.size)
    v = P.evolve_parabolic(ker, v0, ker.start, ker.end)
    assert np.abs(v).max() <= np.abs(v0).max() + 1e-12
    const = P.evolve_parabolic(ker, np.full(ker.size, 2.5), ker.start, ker.end)
    np.testing.assert_allclose(const, 2.5, atol=1e-10)


def test_semigroup_property(coupled_run):
    ker = P.ParabolicKernel.from_coupled(coupled_run, 10)
    mid = ker.times[ker.times.size // 2]
    whole = P.propagator(ker, ker.start, ker.end).matrix
    split = P.propagator(ker, mid, ker.end).matrix @ P.propagator(ker, ker.start, mid).matrix
    np.testing.assert_allclose(whole, split, atol=1e-12)


def test_offset_windows(coupled_run):
    base = P.ParabolicKernel.from_coupled(coupled_run, 10)
    shifted = P.ParabolicKernel.from_coupled(coupled_run, 10, offset=20)
    np.testing.assert_array_equal(shifted.labels, base.labels)
    np.testing.assert_array_equal(shifted.a, coupled_run.micro("x", base.labels + 20))
    with pytest.raises(ValueError):
        P.ParabolicKernel.from_coupled(coupled_run, 10, offset=55)


def test_singular_kernel_detected():
    labels = np.arange(-1, 2)
    a = np.array([[0.0, 1.0, 1.0]])
    ker = P.ParabolicKernel(np.array([0.0]), a, a, labels)
    with pytest.raises(KernelSingular):
        ker.laplacian(0)


def test_decay_envelope_and_holder(coupled_run):
    ker = P.ParabolicKernel.from_coupled(coupled_run, 32)
    U = P.propagator(ker, ker.start, ker.start + 32 ** 0.1)
    fit = P.decay_envelope(U)
    assert fit.exponent < -0.8
    v0 = np.random.default_rng(1).choice([-1.0, 1.0], ker.size)
    res = P.holder_check(ker, v0, [1.5, 3.5])
    assert np.all(res.ratios <= 2.0)
    assert np.isfinite(res.exponent)


def test_local_oscillation():
    labels = np.arange(-3, 4)
    v = labels.astype(float)
    assert P.local_oscillation(v, labels, 2) == pytest.approx(2.0)
    assert P.local_oscillation(v, labels, 0) == 0.0


def test_duhamel_residual_is_small_when_cutoff_covers_window(coupled_run):
    res = P.duhamel_residual(coupled_run, 16)
    assert res.central_sup < 1.0
    assert res.xi_by_label.shape == (33,)
