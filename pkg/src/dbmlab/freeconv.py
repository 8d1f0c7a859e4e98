"""Free convolution of the semicircle law with the empirical measure of V.

The deformed law is defined through its Stieltjes transform, the unique
upper-half-plane solution of

    m(z) = (1/N) sum_i 1 / (alpha V_i - z - s m(z))

with ``(alpha, s) = (exp(-t/2), 1 - exp(-t))`` for the Ornstein-Uhlenbeck
parameterisation ``H_t = exp(-t/2) V + sqrt(1 - exp(-t)) W`` and
``(alpha, s) = (1, T)`` for ``H_T = V + sqrt(T) W``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import IndexOutOfBulk, NonConvergence, ProfileError
from .profiles import PotentialProfile

_EPS = np.finfo(float).eps
_CHUNK = 256


@dataclass(frozen=True)
class SpectralPoint:
    energy: float
    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"spectral parameter must lie in the upper half plane (eta={self.eta})")

    @property
    def z(self) -> complex:
        return complex(self.energy, self.eta)


@dataclass(frozen=True)
class SolverOpts:
    tol: float = 1e-12
    max_iter: int = 20000
    theta_min: float = 0.1
    ladder_factor: float = 0.7


def coefficients(t: float, form: str = "t") -> tuple[float, float]:
    """Return ``(alpha, s)``: the scale applied to V and the variance of the GOE part."""
    if t < 0:
        raise ValueError("time must be non-negative")
    if form == "t":
        return math.exp(-t / 2), -math.expm1(-t)
    if form == "T":
        return 1.0, float(t)
    raise ValueError(f"unknown time parameterisation {form!r} (use 't' or 'T')")


def t_from_T(T: float) -> float:
    """Map the additive-noise variance T to the OU time t with the same GOE weight."""
    if not 0 <= T <= 1:
        raise ValueError("T must lie in [0, 1] to map onto an OU time")
    return math.inf if T == 1 else -math.log1p(-T)


def _as_z(z) -> np.ndarray:
    if isinstance(z, SpectralPoint):
        z = z.z
    arr = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(arr.imag <= 0):
        raise ValueError("spectral parameter must lie in the upper half plane")
    return arr


def stieltjes_V(profile: PotentialProfile, z) -> complex | np.ndarray:
    """``(1/N) sum_i 1/(V_i - z)``; accepts a scalar, array, or SpectralPoint."""
    zs = _as_z(z)
    out = np.empty(zs.shape, dtype=complex)
    v = profile.entries
    for lo in range(0, zs.size, _CHUNK):
        blk = zs[lo:lo + _CHUNK]
        out[lo:lo + _CHUNK] = (1.0 / (v[None, :] - blk[:, None])).mean(axis=1)
    return out[0] if np.ndim(z) == 0 or isinstance(z, SpectralPoint) else out


def _iterate(a, s, z, m, opts: SolverOpts):
    """Damped Picard iteration safeguarded by Newton steps, vectorised over ``z``.

    A Newton candidate is taken whenever it stays in the upper half plane and
    lowers the residual; otherwise the damped Picard step is used, with the
    damping adapted to whether the residual went down.  Returns the solution,
    the final residual and a convergence mask.
    """
    m = m.astype(complex).copy()
    theta = np.ones(z.shape)
    prev = np.full(z.shape, np.inf)
    res = np.full(z.shape, np.inf)
    conv = np.zeros(z.shape, dtype=bool)
    active = np.arange(z.size)

    def fmap(zz, mm):
        g = 1.0 / (a[None, :] - zz[:, None] - s * mm[:, None])
        return g, g.mean(axis=1)

    zz = z[active]
    g, F = fmap(zz, m[active])
    for _ in range(opts.max_iter):
        mm = m[active]
        r = np.abs(mm - F)
        res[active] = r
        floor = 16 * _EPS * np.abs(g).mean(axis=1)
        done = r <= np.maximum(opts.tol, floor)
        conv[active] = done
        if np.all(done):
            break
        keep = ~done
        active, mm, F, r, g, zz = active[keep], mm[keep], F[keep], r[keep], g[keep], zz[keep]
        th = theta[active]
        improved = r < prev[active]
        th = np.where(improved, np.minimum(1.0, th * 1.5), np.maximum(opts.theta_min, th * 0.5))
        theta[active] = th
        prev[active] = r
        step = mm + th * (F - mm)
        if s > 0:
            R2 = (g * g).mean(axis=1)
            newton = mm - (mm - F) / (1.0 - s * R2)
            ok = np.isfinite(newton) & (newton.imag > 0)
            newton = np.where(ok, newton, step)
            g_n, F_n = fmap(zz, newton)
            better = ok & (np.abs(newton - F_n) < r)
            if np.any(better):
                step = np.where(better, newton, step)
            g_p, F_p = fmap(zz[~better], step[~better]) if np.any(~better) else (None, None)
            g_new = g_n.copy()
            F_new = F_n.copy()
            if g_p is not None:
                g_new[~better] = g_p
                F_new[~better] = F_p
            g, F = g_new, F_new
        else:
            g, F = fmap(zz, step)
        m[active] = step
    return m, res, conv


def _ladder(eta_target: np.ndarray, factor: float, start: float = 1.0) -> list[np.ndarray]:
    top = np.maximum(start, eta_target)
    levels = int(np.ceil(np.log(np.max(top / eta_target)) / np.log(1 / factor))) if np.any(top > eta_target) else 0
    return [np.maximum(eta_target, top * factor ** k) for k in range(levels + 1)]


def _continuation(a, s, energies, eta_target, opts: SolverOpts, m0=None):
    """Solve at ``energies + i eta_target`` by sweeping eta down from 1 with warm starts."""
    energies = np.asarray(energies, dtype=float)
    eta_target = np.broadcast_to(np.asarray(eta_target, dtype=float), energies.shape).copy()
    out = np.empty(energies.shape, dtype=complex)
    for lo in range(0, energies.size, _CHUNK):
        E = energies[lo:lo + _CHUNK]
        et = eta_target[lo:lo + _CHUNK]
        m = np.full(E.shape, 1j) if m0 is None else np.asarray(m0[lo:lo + _CHUNK], dtype=complex)
        for eta in _ladder(et, opts.ladder_factor):
            m, res, conv = _iterate(a, s, E + 1j * eta, m, opts)
            bad = ~conv
            if np.any(bad):
                k = int(np.argmax(np.where(bad, res, -1)))
                raise NonConvergence(
                    f"fixed point not reached at E={E[k]:.6g}, eta={eta[k]:.3g} (residual {res[k]:.3g})",
                    residual=float(res[k]), energy=float(E[k]), eta=float(eta[k]))
        out[lo:lo + _CHUNK] = m
    return out


def solve_mfc(profile: PotentialProfile, t: float, z, opts: SolverOpts | None = None, *, form: str = "t"):
    """Stieltjes transform of the deformed law at ``z`` (scalar, array or SpectralPoint).

    Solved directly at the requested eta; raises NonConvergence if that fails
    (use :func:`solve_mfc_continued` or :func:`solve_mfc_grid` for tiny eta).
    """
    opts = opts or SolverOpts()
    alpha, s = coefficients(t, form)
    zs = _as_z(z)
    a = alpha * profile.entries
    out = np.empty(zs.shape, dtype=complex)
    for lo in range(0, zs.size, _CHUNK):
        blk = zs[lo:lo + _CHUNK]
        m, res, conv = _iterate(a, s, blk, np.full(blk.shape, 1j), opts)
        bad = ~conv
        if np.any(bad):
            k = int(np.argmax(np.where(bad, res, -1)))
            raise NonConvergence(f"no fixed point within {opts.max_iter} iterations at z={blk[k]}",
                                 residual=float(res[k]), energy=float(blk[k].real), eta=float(blk[k].imag))
        out[lo:lo + _CHUNK] = m
    return out[0] if np.ndim(z) == 0 or isinstance(z, SpectralPoint) else out


def solve_mfc_continued(profile: PotentialProfile, t: float, z, opts: SolverOpts | None = None, *, form: str = "t"):
    """Like :func:`solve_mfc` but reaches small eta through the continuation ladder."""
    opts = opts or SolverOpts()
    alpha, s = coefficients(t, form)
    zs = _as_z(z)
    out = _continuation(alpha * profile.entries, s, zs.real, zs.imag, opts)
    return out[0] if np.ndim(z) == 0 or isinstance(z, SpectralPoint) else out


def default_grid(profile: PotentialProfile, t: float, *, form: str = "t", spacing: float = 1e-3) -> np.ndarray:
    alpha, s = coefficients(t, form)
    radius = 2.0 * math.sqrt(s) + 0.05
    lo = alpha * profile.entries[0] - radius
    hi = alpha * profile.entries[-1] + radius
    n = int(math.ceil((hi - lo) / spacing)) + 1
    return np.linspace(lo, hi, n)


def default_eta_floor(t: float, form: str = "t") -> float:
    return 1e-4 * min(1.0, t)


@dataclass(frozen=True)
class FreeConvolution:
    profile: PotentialProfile
    time: float
    form: str
    grid: np.ndarray
    m_values: np.ndarray
    density: np.ndarray
    cdf: np.ndarray
    classical_locations: np.ndarray
    eta_floor: float
    opts: SolverOpts = field(default_factory=SolverOpts, compare=False)

    @property
    def n(self) -> int:
        return self.profile.n

    @property
    def mass(self) -> float:
        return float(np.trapezoid(self.density, self.grid))

    def stieltjes(self, z):
        """m_fc at arbitrary upper-half-plane points (continuation solve)."""
        return solve_mfc_continued(self.profile, self.time, z, self.opts, form=self.form)

    def density_at(self, energies) -> np.ndarray | float:
        """rho_fc(E) recomputed at ``E + i eta_floor`` (not interpolated)."""
        e = np.atleast_1d(np.asarray(energies, dtype=float))
        rho = self.stieltjes(e + 1j * self.eta_floor).imag / np.pi
        return rho[0] if np.ndim(energies) == 0 else rho

    def counting(self, energies) -> np.ndarray:
        """n_fc(E): the normalised integrated density."""
        interp = PchipInterpolator(self.grid, self.cdf, extrapolate=False)
        e = np.asarray(energies, dtype=float)
        out = interp(e)
        out = np.where(e <= self.grid[0], 0.0, out)
        out = np.where(e >= self.grid[-1], 1.0, out)
        return out

    def window(self, q: float) -> tuple[float, float]:
        g = q * self.profile.window
        return self.profile.center - g, self.profile.center + g


def _quantiles(grid: np.ndarray, cdf: np.ndarray, targets: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Invert a monotone cumulative table: monotone cubic interpolant, then bisection."""
    interp = PchipInterpolator(grid, cdf)
    idx = np.clip(np.searchsorted(cdf, targets, side="left"), 1, grid.size - 1)
    lo = grid[idx - 1].copy()
    hi = grid[idx].copy()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = interp(mid) < targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(np.abs(interp(hi) - interp(lo)) <= tol) or np.all(hi - lo <= 4 * _EPS * np.maximum(1, np.abs(hi))):
            break
    return 0.5 * (lo + hi)


def solve_mfc_grid(profile: PotentialProfile, t: float, grid=None, eta_floor: float | None = None,
                   opts: SolverOpts | None = None, *, form: str = "t") -> FreeConvolution:
    """Solve on an energy grid, recover the density at ``eta_floor`` and the classical locations."""
    opts = opts or SolverOpts()
    grid = default_grid(profile, t, form=form) if grid is None else np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be a strictly increasing 1-d array")
    eta_floor = default_eta_floor(t, form) if eta_floor is None else float(eta_floor)
    if not eta_floor > 0:
        raise ValueError("eta_floor must be positive")
    alpha, s = coefficients(t, form)
    m = _continuation(alpha * profile.entries, s, grid, eta_floor, opts)
    rho = np.maximum(m.imag, 0.0) / np.pi
    steps = 0.5 * (rho[1:] + rho[:-1]) * np.diff(grid)
    cum = np.concatenate([[0.0], np.cumsum(steps)])
    total = cum[-1]
    if not total > 0:
        raise ProfileError("density integrates to zero on the grid")
    cdf = cum / total
    n = profile.n
    targets = np.arange(1, n + 1) / n
    gamma = _quantiles(grid, cdf, targets)
    gamma = np.maximum.accumulate(gamma)
    return FreeConvolution(profile, float(t), form, grid, m, rho, cdf, gamma, eta_floor, opts)


# ---------------------------------------------------------------- semicircle


def rho_sc(x, a: float = 1.0, b: float = 0.0):
    """Density of ``a W + b``: ``sqrt(4 a^2 - (x-b)^2) / (2 pi a^2)`` on ``|x - b| <= 2a``."""
    u = np.asarray(x, dtype=float) - b
    return np.where(np.abs(u) <= 2 * a, np.sqrt(np.maximum(4 * a * a - u * u, 0.0)) / (2 * np.pi * a * a), 0.0)


def semicircle_cdf(x):
    e = np.clip(np.asarray(x, dtype=float), -2.0, 2.0)
    return (e * np.sqrt(4 - e * e) + 4 * np.arcsin(e / 2)) / (4 * np.pi) + 0.5


def m_sc(z):
    """Semicircle Stieltjes transform ``(-z + sqrt(z^2 - 4)) / 2`` on the Herglotz branch."""
    z = np.asarray(z, dtype=complex)
    r = np.sqrt(z - 2) * np.sqrt(z + 2)
    return (-z + r) / 2


def classical_locations_sc(n: int, a: float = 1.0, b: float = 0.0) -> np.ndarray:
    """``mu_k^{(a,b)}`` for k = 1..N (returned 0-based): the k/N quantiles of ``rho_sc^{(a,b)}``.

    Computed as ``a * mu_k + b`` so the scaling identity holds by construction.
    """
    if n < 1:
        raise ValueError("N must be positive")
    if not a > 0:
        raise ValueError("a must be positive")
    targets = np.arange(1, n + 1) / n
    lo = np.full(n, -2.0)
    hi = np.full(n, 2.0)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        below = semicircle_cdf(mid) < targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    mu = 0.5 * (lo + hi)
    mu[targets >= 1.0] = 2.0
    if a == 1.0 and b == 0.0:
        return mu
    return a * mu + b


@dataclass(frozen=True)
class SemicircleLaw:
    """The law of ``a W + b`` with the same query surface as ``FreeConvolution``.

    ``center`` and ``half_width`` play the roles of E0 and G for bulk windows.
    """

    n: int
    a: float = 1.0
    b: float = 0.0
    center: float = 0.0
    half_width: float = 1.0

    @property
    def time(self) -> float:
        return math.inf

    @property
    def classical_locations(self) -> np.ndarray:
        return classical_locations_sc(self.n, self.a, self.b)

    def stieltjes(self, z):
        zz = (np.asarray(z, dtype=complex) - self.b) / self.a
        out = m_sc(zz) / self.a
        return complex(out) if np.ndim(z) == 0 else out

    def density_at(self, energies):
        out = rho_sc(energies, self.a, self.b)
        return float(out) if np.ndim(energies) == 0 else out

    def counting(self, energies):
        return semicircle_cdf((np.asarray(energies, dtype=float) - self.b) / self.a)

    def window(self, q: float) -> tuple[float, float]:
        g = q * self.half_width
        return self.center - g, self.center + g


# ----------------------------------------------------------- regularity of V


@dataclass(frozen=True)
class RegularityReport:
    c_V: float
    C_V: float
    passed: bool
    lower_threshold: float
    upper_threshold: float
    argmin: tuple[float, float]
    argmax: tuple[float, float]

    def to_dict(self) -> dict:
        return {"c_V": self.c_V, "C_V": self.C_V, "pass": self.passed,
                "lower_threshold": self.lower_threshold, "upper_threshold": self.upper_threshold}


def check_regularity(profile: PotentialProfile, q: float = 0.5, *, lower: float = 0.05, upper: float = 20.0,
                     n_energy: int = 41, n_eta: int = 40) -> RegularityReport:
    """Scan Im m_V over ``E in (E0 - qG, E0 + qG)`` and ``eta in [ell, 10]``.

    Passes iff the smallest value is at least ``lower`` and the largest at most
    ``upper``; the thresholds stand in for the unnamed constants c_V, C_V.
    """
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    if profile.window <= profile.ell:
        raise ProfileError("G must exceed ell")
    half = q * profile.window
    energies = np.linspace(profile.center - half, profile.center + half, n_energy)
    etas = np.geomspace(profile.ell, 10.0, n_eta)
    E, H = np.meshgrid(energies, etas, indexing="ij")
    im = stieltjes_V(profile, (E + 1j * H).ravel()).imag.reshape(E.shape)
    i_min = np.unravel_index(np.argmin(im), im.shape)
    i_max = np.unravel_index(np.argmax(im), im.shape)
    c_v, C_v = float(im[i_min]), float(im[i_max])
    return RegularityReport(c_v, C_v, bool(c_v >= lower and C_v <= upper), lower, upper,
                            (float(E[i_min]), float(H[i_min])), (float(E[i_max]), float(H[i_max])))


def counting_measure_ratio(profile: PotentialProfile, energies, eta: float) -> np.ndarray:
    """``|{i : V_i in [E - eta, E + eta]}| / (N eta)`` for each energy."""
    e = np.atleast_1d(np.asarray(energies, dtype=float))
    v = profile.entries
    counts = np.searchsorted(v, e + eta, side="right") - np.searchsorted(v, e - eta, side="left")
    return counts / (profile.n * eta)


# --------------------------------------------------------------- diagnostics


@dataclass(frozen=True)
class MatchingParams:
    a: float
    b: float
    k0: int
    j0: int
    sweep_max: float
    sweep_width: int

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "k0": self.k0, "j0": self.j0,
                "sweep_max": self.sweep_max, "sweep_width": self.sweep_width}


def matching_params(fc: FreeConvolution, k0: int, j0: int, n: int | None = None, *,
                    q: float = 0.5, alpha: float = 0.1) -> MatchingParams:
    """Scale and shift making the GOE quantiles around ``j0`` track ``gamma`` around ``k0``.

    Indices are 0-based (``gamma[k]`` is the (k+1)/N quantile).  The sweep
    reports ``max N |mu^{(a,b)}_{j0+j} - gamma_{k0+j}|`` over ``|j| <= sqrt(N t)``.
    """
    n = fc.n if n is None else n
    lo, hi = fc.window(q)
    gamma = fc.classical_locations
    if not 0 <= k0 < gamma.size or not lo < gamma[k0] < hi:
        raise IndexOutOfBulk(f"k0={k0} is not in the bulk index set for q={q}")
    if not alpha * n <= j0 + 1 <= (1 - alpha) * n:
        raise IndexOutOfBulk(f"j0={j0} outside [alpha N, (1 - alpha) N] for alpha={alpha}")
    mu = classical_locations_sc(n)
    a = float(rho_sc(mu[j0]) / fc.density_at(gamma[k0]))
    b = float(gamma[k0] - a * mu[j0])
    width = int(math.floor(math.sqrt(n * fc.time))) if math.isfinite(fc.time) else n
    js = np.arange(-width, width + 1)
    ok = (js + j0 >= 0) & (js + j0 < n) & (js + k0 >= 0) & (js + k0 < gamma.size)
    js = js[ok]
    mu_ab = a * mu[js + j0] + b
    sweep = float(n * np.max(np.abs(mu_ab - gamma[js + k0])))
    return MatchingParams(a, b, int(k0), int(j0), sweep, width)


@dataclass(frozen=True)
class StabilityFunctionals:
    R2: complex
    R3: complex
    one_minus_TR2: complex
    g_i_log_avg: float
    m: complex

    def to_dict(self) -> dict:
        return {"R2": [self.R2.real, self.R2.imag], "R3": [self.R3.real, self.R3.imag],
                "abs_one_minus_TR2": abs(self.one_minus_TR2), "g_i_log_avg": self.g_i_log_avg}


def stability_functionals(profile: PotentialProfile, t: float, z, opts: SolverOpts | None = None,
                          *, form: str = "t") -> StabilityFunctionals:
    """``R_k = (1/N) sum_i g_i^k`` with ``g_i = 1/(alpha V_i - z - s m)``, plus ``1 - s R_2`` and mean |g_i|."""
    alpha, s = coefficients(t, form)
    zc = _as_z(z)[0]
    m = solve_mfc_continued(profile, t, zc, opts, form=form)
    g = 1.0 / (alpha * profile.entries - zc - s * m)
    R2 = complex((g ** 2).mean())
    R3 = complex((g ** 3).mean())
    return StabilityFunctionals(R2, R3, complex(1.0 - s * R2), float(np.abs(g).mean()), complex(m))


def gamma_time_derivative(fc: FreeConvolution, i: int) -> float:
    """Velocity of the classical location ``gamma[i]`` (0-based).

    OU time: ``-Re m_fc(gamma) - gamma/2``; additive form: ``-Re m_fc(gamma)``.
    """
    g = float(fc.classical_locations[i])
    m = fc.stieltjes(complex(g, fc.eta_floor))
    v = -m.real
    if fc.form == "t":
        v -= g / 2
    return float(v)


def density_bounds(fc: FreeConvolution, q: float = 0.5) -> dict:
    """min/max of rho_fc on the bulk window and ``t * max |rho'|`` by centred differences."""
    lo, hi = fc.window(q)
    sel = (fc.grid > lo) & (fc.grid < hi)
    rho = fc.density[sel]
    e = fc.grid[sel]
    deriv = np.gradient(rho, e) if rho.size > 2 else np.zeros(1)
    return {"rho_min": float(rho.min()), "rho_max": float(rho.max()),
            "t_times_max_abs_drho": float(fc.time * np.max(np.abs(deriv)))}
