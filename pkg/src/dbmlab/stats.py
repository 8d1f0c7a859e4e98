"""Observables computed from spectra: local law, rigidity, counting, repulsion, gap statistics.

``law`` arguments accept either a ``FreeConvolution`` or a ``SemicircleLaw``;
both expose ``classical_locations``, ``stieltjes``, ``density_at``,
``counting`` and ``window``.  Spectra are passed as an ``(n_samples, N)``
array or a list of ``EnsembleSample``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.stats import ks_2samp

from .ensembles import spectra as _stack
from .errors import InsufficientSamples, WindowOutsideBulk


def polylog_threshold(n: int, power: float = 3.0) -> float:
    """The default polylogarithmic threshold ``(log N)^power``."""
    return math.log(n) ** power


def as_spectra(samples) -> np.ndarray:
    arr = samples if isinstance(samples, np.ndarray) else _stack(samples)
    arr = np.atleast_2d(np.asarray(arr, dtype=float))
    return arr


def summarize(values) -> dict:
    """Median, quartiles, extremes and count of a sample of numbers."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        return {"count": 0}
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"count": int(v.size), "min": float(v.min()), "q1": float(q1), "median": float(med),
            "q3": float(q3), "max": float(v.max())}


# ------------------------------------------------------------ bulk indices


@dataclass(frozen=True)
class BulkIndexSet:
    q: float
    indices: np.ndarray
    interval: tuple[float, float]

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int)
        if idx.size and np.any(np.diff(idx) != 1):
            raise ValueError("bulk indices must be contiguous")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return self.indices.size

    def __contains__(self, i) -> bool:
        return bool(self.indices.size) and self.indices[0] <= i <= self.indices[-1]

    def issubset(self, other: "BulkIndexSet") -> bool:
        return bool(np.all(np.isin(self.indices, other.indices)))


def bulk_index_set(law, q: float) -> BulkIndexSet:
    """``{i : gamma_i in (E0 - qG, E0 + qG)}`` (0-based)."""
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    lo, hi = law.window(q)
    gamma = law.classical_locations
    idx = np.flatnonzero((gamma > lo) & (gamma < hi))
    return BulkIndexSet(float(q), idx, (float(lo), float(hi)))


def bulk_nesting(law_s, law_t, q1: float, q2: float) -> bool:
    """Whether ``A_{q1, s}`` is contained in ``A_{q2, t}``."""
    return bulk_index_set(law_s, q1).issubset(bulk_index_set(law_t, q2))


# --------------------------------------------------------------- local law


@dataclass(frozen=True)
class LocalLawReport:
    table: list
    sup_scaled_error: float
    slope: float
    threshold: float
    slope_window: tuple[float, float]

    @property
    def passes(self) -> bool:
        lo, hi = self.slope_window
        return bool(self.sup_scaled_error <= self.threshold and lo <= self.slope <= hi)


def local_law_check(law, samples, energies, etas, *, threshold: float | None = None,
                    slope_window=(-1.3, -0.7)) -> LocalLawReport:
    """``N eta |m_N(z) - m_fc(z)|`` on the grid ``energies x etas``.

    The slope is the least-squares log-log slope of the median (over samples
    and energies) of ``|m_N - m_fc|`` against ``eta``.
    """
    ev = as_spectra(samples)
    n = ev.shape[1]
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    etas = np.atleast_1d(np.asarray(etas, dtype=float))
    threshold = polylog_threshold(n) if threshold is None else float(threshold)
    z = (energies[:, None] + 1j * etas[None, :]).ravel()
    m_fc = np.asarray(law.stieltjes(z))
    table = []
    med_by_eta = np.zeros(etas.size)
    sup = 0.0
    errs = np.empty((ev.shape[0], z.size))
    for k, row in enumerate(ev):
        m_n = (1.0 / (row[None, :] - z[:, None])).mean(axis=1)
        errs[k] = np.abs(m_n - m_fc)
    errs = errs.reshape(ev.shape[0], energies.size, etas.size)
    for j, eta in enumerate(etas):
        med_by_eta[j] = float(np.median(errs[:, :, j]))
        for i, e in enumerate(energies):
            col = errs[:, i, j]
            scaled = n * eta * col
            sup = max(sup, float(scaled.max()))
            table.append({"E": float(e), "eta": float(eta), "median_abs_err": float(np.median(col)),
                          "max_scaled_err": float(scaled.max())})
    slope = float("nan")
    if etas.size >= 2 and np.all(med_by_eta > 0):
        slope = float(np.polyfit(np.log(etas), np.log(med_by_eta), 1)[0])
    return LocalLawReport(table, sup, slope, threshold, tuple(slope_window))


# ---------------------------------------------------------------- rigidity


@dataclass(frozen=True)
class RigidityReport:
    per_sample_max: np.ndarray
    median: float
    threshold: float
    center_median: float
    boundary_median: float
    scaled_errors: np.ndarray = field(repr=False)

    @property
    def passes(self) -> bool:
        return bool(self.median <= self.threshold)


def rigidity_check(law, samples, q: float = 0.5, *, threshold: float | None = None) -> RigidityReport:
    """Per sample ``max_{i in A_q} N |lambda_i - gamma_i|``.

    Also reports the median error over the central fifth of the bulk indices
    and over the outer fifths, for the centre-versus-boundary comparison.
    """
    ev = as_spectra(samples)
    n = ev.shape[1]
    bulk = bulk_index_set(law, q)
    if len(bulk) == 0:
        raise WindowOutsideBulk(f"no classical location lies in the q={q} window")
    gamma = law.classical_locations
    idx = bulk.indices
    scaled = n * np.abs(ev[:, idx] - gamma[idx][None, :])
    per = scaled.max(axis=1)
    k = max(1, idx.size // 5)
    mid = idx.size // 2
    center = scaled[:, max(0, mid - k // 2):mid - k // 2 + k]
    boundary = np.concatenate([scaled[:, :k], scaled[:, -k:]], axis=1)
    threshold = polylog_threshold(n) if threshold is None else float(threshold)
    return RigidityReport(per, float(np.median(per)), threshold, float(np.median(center)),
                          float(np.median(boundary)), scaled)


@dataclass(frozen=True)
class CountingReport:
    per_sample_sup: np.ndarray
    median: float
    threshold: float

    @property
    def passes(self) -> bool:
        return bool(self.median <= self.threshold)


def counting_error(samples, law, q: float = 0.5, *, energies=None, threshold: float | None = None) -> CountingReport:
    """Per sample ``sup_E N |n_N(E) - n_fc(E)|`` over the bulk window.

    The supremum is taken over the given energies (default: a 400-point grid
    of the window) together with both one-sided limits at every eigenvalue
    inside it, where the empirical count jumps.
    """
    ev = as_spectra(samples)
    n = ev.shape[1]
    lo, hi = law.window(q)
    grid = np.linspace(lo, hi, 400) if energies is None else np.asarray(energies, dtype=float)
    sups = np.zeros(ev.shape[0])
    for k, row in enumerate(ev):
        inside = row[(row > lo) & (row < hi)]
        pts = np.concatenate([grid, inside])
        n_fc = np.asarray(law.counting(pts))
        right = np.searchsorted(row, pts, side="right") / n
        left = np.searchsorted(row, pts, side="left") / n
        sups[k] = n * max(np.max(np.abs(right - n_fc)), np.max(np.abs(left - n_fc)))
    threshold = polylog_threshold(n) if threshold is None else float(threshold)
    return CountingReport(sups, float(np.median(sups)), threshold)


# -------------------------------------------------------- level repulsion


@dataclass(frozen=True)
class RepulsionFit:
    eps_grid: np.ndarray
    cdf: np.ndarray
    exponent: float
    observations: int
    window: tuple[float, float]
    k2_energy_prob: np.ndarray
    k2_energy_exponent: float
    k2_centered_prob: np.ndarray
    reference_k2_slope: float = 3.0

    @property
    def passes(self) -> bool:
        lo, hi = self.window
        return bool(lo <= self.exponent <= hi)

    def table(self) -> list:
        return [{"eps": float(e), "p_gap": float(p), "p_two_fixed_E": float(q), "p_two_centered": float(r)}
                for e, p, q, r in zip(self.eps_grid, self.cdf, self.k2_energy_prob, self.k2_centered_prob)]


def _loglog_slope(x, y) -> float:
    keep = (np.asarray(y) > 0)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(np.asarray(x)[keep]), np.log(np.asarray(y)[keep]), 1)[0])


def level_repulsion_fit(samples, bulk: BulkIndexSet, eps_grid=None, *, energies=None,
                        min_observations: int = 10_000, window=(1.7, 2.3)) -> RepulsionFit:
    """Small-gap statistics on the bulk indices.

    * ``P[N (lambda_{i+1} - lambda_i) <= eps]`` over all bulk gaps and samples,
      with its log-log exponent (k = 1).
    * ``P[N_I >= 2]`` for ``I = [E - eps/N, E + eps/N]`` at fixed energies
      (default: 20 points of the bulk interval) and its exponent, to be
      compared with the reference slope 3 (k = 2).
    * The same two-point count for intervals centred at the bulk eigenvalues.
    """
    ev = as_spectra(samples)
    n = ev.shape[1]
    eps_grid = np.geomspace(0.05, 0.5, 10) if eps_grid is None else np.sort(np.asarray(eps_grid, dtype=float))
    idx = bulk.indices[bulk.indices < n - 1]
    gaps = n * (ev[:, idx + 1] - ev[:, idx]).ravel()
    if gaps.size < min_observations:
        raise InsufficientSamples(f"{gaps.size} gap observations, need at least {min_observations}")
    gaps.sort()
    cdf = np.searchsorted(gaps, eps_grid, side="right") / gaps.size
    exponent = _loglog_slope(eps_grid, cdf)
    lo, hi = bulk.interval
    energies = np.linspace(lo, hi, 22)[1:-1] if energies is None else np.asarray(energies, dtype=float)
    # nearest-neighbour distance of each bulk eigenvalue, for the centred count
    b_idx = bulk.indices
    right = np.where(b_idx[None, :] < n - 1, ev[:, np.minimum(b_idx + 1, n - 1)] - ev[:, b_idx], np.inf)
    left = np.where(b_idx[None, :] > 0, ev[:, b_idx] - ev[:, np.maximum(b_idx - 1, 0)], np.inf)
    nearest = np.minimum(right, left)
    k2 = np.zeros(eps_grid.size)
    k2c = np.zeros(eps_grid.size)
    for j, eps in enumerate(eps_grid):
        half = eps / n
        hits = 0
        for row in ev:
            c = np.searchsorted(row, energies + half, side="right") - np.searchsorted(row, energies - half, side="left")
            hits += int(np.count_nonzero(c >= 2))
        k2[j] = hits / (ev.shape[0] * energies.size)
        k2c[j] = float(np.mean(nearest <= half))
    return RepulsionFit(eps_grid, cdf, exponent, int(gaps.size), tuple(window), k2,
                        _loglog_slope(eps_grid, k2), k2c)


# ------------------------------------------------------- gap universality


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    return float(ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float)).statistic)


def ks_null_band(a, b, *, resamples: int = 500, level: float = 0.95, seed: int = 0) -> float:
    """``level`` quantile of the KS distance between random splits of the pooled samples."""
    pooled = np.concatenate([np.asarray(a, dtype=float), np.asarray(b, dtype=float)])
    na = len(a)
    rng = np.random.default_rng(seed)
    stats = np.empty(resamples)
    for k in range(resamples):
        perm = rng.permutation(pooled)
        stats[k] = ks_distance(perm[:na], perm[na:])
    return float(np.quantile(stats, level))


@dataclass(frozen=True)
class GapUniversality:
    ks: float
    null_band: float
    deformed_gaps: np.ndarray = field(repr=False)
    goe_gaps: np.ndarray = field(repr=False)
    threshold: float = 0.1
    band_factor: float = 2.0

    @property
    def passes(self) -> bool:
        return bool(self.ks <= self.threshold and self.ks <= self.band_factor * self.null_band)


def rescaled_gaps(samples, law, index: int) -> np.ndarray:
    """``N rho(gamma_index) (lambda_{index+1} - lambda_index)`` for every sample."""
    ev = as_spectra(samples)
    n = ev.shape[1]
    if not 0 <= index < n - 1:
        raise IndexError(f"index {index} has no right neighbour")
    rho = float(law.density_at(law.classical_locations[index]))
    return n * rho * (ev[:, index + 1] - ev[:, index])


def gap_universality_distance(deformed_samples, goe_samples, k0: int, j0: int, fc, goe_law, *,
                              q: float = 0.5, min_samples: int = 200, resamples: int = 500, seed: int = 0,
                              threshold: float = 0.1) -> GapUniversality:
    """KS distance between rescaled gaps at ``k0`` (deformed) and ``j0`` (GOE), with a permutation null band."""
    from .errors import IndexOutOfBulk

    if k0 not in bulk_index_set(fc, q):
        raise IndexOutOfBulk(f"k0={k0} is not a bulk index for q={q}")
    if j0 not in bulk_index_set(goe_law, q):
        raise IndexOutOfBulk(f"j0={j0} is not a bulk index of the GOE law for q={q}")
    d = rescaled_gaps(deformed_samples, fc, k0)
    g = rescaled_gaps(goe_samples, goe_law, j0)
    if min(d.size, g.size) < min_samples:
        raise InsufficientSamples(f"need at least {min_samples} samples per ensemble, got {d.size} and {g.size}")
    return GapUniversality(ks_distance(d, g), ks_null_band(d, g, resamples=resamples, seed=seed), d, g, threshold)


# --------------------------------------------------- averaged correlations


@dataclass(frozen=True)
class GaussianBump:
    """Test functions built from Gaussians.

    n = 1: ``O(a) = exp(-(a - c)^2 / (2 w^2))``.
    n = 2: ``O(a1, a2) = exp(-(a1 - a2 - c)^2 / (2 w^2)) exp(-((a1 + a2)/2)^2 / (2 W^2))``.
    """

    center: float = 0.0
    width: float = 1.0
    envelope: float = 2.0


def _window_integral(u_lo, u_hi, c, w):
    """``int_{u_lo}^{u_hi} exp(-(u - c)^2 / (2 w^2)) du``."""
    s = w * math.sqrt(2.0)
    return w * math.sqrt(math.pi / 2) * (special.erf((u_hi - c) / s) - special.erf((u_lo - c) / s))


def _averaged_observable(row, E, b, rho, n_pts, bump: GaussianBump):
    """Energy-averaged ``sum over distinct tuples of O(N rho (lambda - E'))`` for one spectrum."""
    n = row.size
    scale = n * rho
    reach = b + 12 * (bump.width + abs(bump.center) + bump.envelope) / scale
    lam = row[(row > E - reach) & (row < E + reach)]
    if n_pts == 1:
        u_hi = scale * (lam - E + b)
        u_lo = scale * (lam - E - b)
        total = _window_integral(u_lo, u_hi, bump.center, bump.width).sum() / scale
        return total / (2 * b)
    diff = scale * (lam[:, None] - lam[None, :])
    mid = 0.5 * (lam[:, None] + lam[None, :])
    first = np.exp(-(diff - bump.center) ** 2 / (2 * bump.width ** 2))
    np.fill_diagonal(first, 0.0)
    u_hi = scale * (mid - E + b)
    u_lo = scale * (mid - E - b)
    second = _window_integral(u_lo, u_hi, 0.0, bump.envelope) / scale
    return float((first * second).sum() / (2 * b))


@dataclass(frozen=True)
class CorrelationComparison:
    deformed: float
    goe: float
    difference: float
    bootstrap_sigma: float
    n_points: int

    def within(self, k: float) -> bool:
        return bool(abs(self.difference) <= k * self.bootstrap_sigma)


def averaged_correlation_compare(deformed_samples, goe_samples, E: float, b: float, n_points: int, fc, goe_law, *,
                                 E_goe: float | None = None, bump: GaussianBump | None = None, q: float = 0.5,
                                 resamples: int = 400, seed: int = 0) -> CorrelationComparison:
    """Energy-averaged n-point observable of both ensembles and their difference.

    Each side estimates ``N^n / (N)_n * E[sum_{distinct tuples} O(N rho (lambda - E'))]``
    averaged uniformly over ``E'`` in ``[E - b, E + b]`` (the average of the
    Gaussian test functions is done in closed form).  ``rho`` is fixed at the
    window centre of each ensemble.  The error is a bootstrap over samples.
    """
    if n_points not in (1, 2):
        raise ValueError("n_points must be 1 or 2")
    bump = bump or GaussianBump()
    E_goe = goe_law.window(q)[0] / 2 + goe_law.window(q)[1] / 2 if E_goe is None else float(E_goe)
    for law, centre, name in ((fc, E, "deformed"), (goe_law, E_goe, "GOE")):
        lo, hi = law.window(q)
        if centre - b < lo or centre + b > hi:
            raise WindowOutsideBulk(f"[{centre - b:.4g}, {centre + b:.4g}] leaves the {name} bulk window [{lo:.4g}, {hi:.4g}]")
    out = []
    for samples, law, centre in ((deformed_samples, fc, E), (goe_samples, goe_law, E_goe)):
        ev = as_spectra(samples)
        n = ev.shape[1]
        rho = float(law.density_at(centre))
        norm = 1.0 if n_points == 1 else n / (n - 1.0)
        out.append(norm * np.array([_averaged_observable(r, centre, b, rho, n_points, bump) for r in ev]))
    d_vals, g_vals = out
    rng = np.random.default_rng(seed)
    diffs = np.empty(resamples)
    for k in range(resamples):
        diffs[k] = rng.choice(d_vals, d_vals.size).mean() - rng.choice(g_vals, g_vals.size).mean()
    diff = float(d_vals.mean() - g_vals.mean())
    return CorrelationComparison(float(d_vals.mean()), float(g_vals.mean()), diff, float(diffs.std(ddof=1)), n_points)


# ------------------------------------------------------------------ report


@dataclass
class ExperimentReport:
    """Config snapshot, seed, metric summaries and the overall verdict."""

    kind: str
    config: dict
    seed: int
    metrics: dict
    passed: bool
    checks: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"schema_version": 1, "kind": self.kind, "config": self.config, "seed": self.seed,
                "metrics": self.metrics, "checks": self.checks, "pass": bool(self.passed)}
