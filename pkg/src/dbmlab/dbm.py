"""Dyson Brownian motion integrators: single, coupled, regularised and short-range.

Macroscopic dynamics (beta = 1):

    d lambda_i = sqrt(2/N) dB_i + ((1/N) sum_{k != i} 1/(lambda_i - lambda_k) - lambda_i/2) dt

A step of size h treats the nearest-neighbour repulsion implicitly, the rest
of the interaction and the noise explicitly, and the restoring force exactly:

    a      = lambda + h * D_far(lambda) + sqrt(2/N) * dB
    mu     = argmin  sum_i (mu_i - a_i)^2 / 2 - (h/N) sum_i log(mu_{i+1} - mu_i)
    lambda <- exp(-h/2) * mu

The minimiser is the unique solution of the nearest-neighbour implicit Euler
equation and always lies in the ordered chamber, so ordering survives the
near-collisions that beta = 1 makes unavoidable.  A step is accepted only if
no particle moved more than half of its smaller adjacent gap.  Otherwise the
Brownian increment over ``h`` is split into two increments over ``h/2`` with
the correct joint law (Brownian bridge midpoint) and both halves are
attempted in turn.  At ``dt * 2**-max_halvings`` the ordered implicit step is
taken as is; ``StepCollapse`` is raised only if the implicit solve fails.

The microscopic variables of the coupling argument are
``x_j(tau) = N lambda_{k0 + j}(t0 + tau / N)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import StepCollapse
from .rng import RngStream


@numba.njit(cache=True)
def _interaction(x, eps):
    """``sum_{k != i} 1/(x_i - x_k + eps_ik)`` with ``eps_ik = eps * sign(i - k)``."""
    n = x.shape[0]
    out = np.zeros(n)
    for i in range(n):
        xi = x[i]
        acc = 0.0
        for k in range(i):
            acc += 1.0 / (xi - x[k] + eps)
        for k in range(i + 1, n):
            acc += 1.0 / (xi - x[k] - eps)
        out[i] = acc
    return out


@numba.njit(cache=True)
def _interaction_outside(x, lo, hi, eps):
    """For ``lo <= i < hi``: the part of the interaction sum coming from ``k`` outside ``[lo, hi)``."""
    n = x.shape[0]
    out = np.zeros(hi - lo)
    for i in range(lo, hi):
        xi = x[i]
        acc = 0.0
        for k in range(lo):
            acc += 1.0 / (xi - x[k] + eps)
        for k in range(hi, n):
            acc += 1.0 / (xi - x[k] - eps)
        out[i - lo] = acc
    return out


@numba.njit(cache=True)
def _interaction_far(x):
    """Interaction sum without the two nearest neighbours (each pair visited once)."""
    n = x.shape[0]
    out = np.zeros(n)
    for i in range(n):
        xi = x[i]
        acc = 0.0
        for k in range(i + 2, n):
            r = 1.0 / (xi - x[k])
            acc += r
            out[k] -= r
        out[i] += acc
    return out


@numba.njit(cache=True)
def _barrier(mu, a, c):
    val = 0.0
    for i in range(mu.shape[0]):
        val += 0.5 * (mu[i] - a[i]) ** 2
    for i in range(mu.shape[0] - 1):
        val -= c * math.log(mu[i + 1] - mu[i])
    return val


@numba.njit(cache=True)
def _implicit_nn(a, start, c):
    """Minimise the nearest-neighbour barrier functional by damped Newton (tridiagonal Hessian).

    Returns ``(mu, ok)``; ``start`` must be strictly increasing.
    """
    n = a.shape[0]
    mu = start.copy()
    if n == 1 or c == 0.0:
        # no barrier: the minimiser is a itself, which must still be ordered
        ok = True
        for i in range(n - 1):
            if not a[i + 1] > a[i]:
                ok = False
        return a.copy(), ok
    grad = np.empty(n)
    off = np.empty(n - 1)
    cp = np.empty(n)
    dp = np.empty(n)
    step = np.empty(n)
    trial = np.empty(n)
    fval = _barrier(mu, a, c)
    for it in range(200):
        for i in range(n):
            grad[i] = mu[i] - a[i]
        for i in range(n - 1):
            g = mu[i + 1] - mu[i]
            inv = c / g
            grad[i] += inv
            grad[i + 1] -= inv
            off[i] = -inv / g
        gnorm = 0.0
        for i in range(n):
            gnorm = max(gnorm, abs(grad[i]))
        # Thomas algorithm for H step = grad.  H = I + weighted path Laplacian, so each
        # pivot is r_i + w_i with r_i = 1 + w_{i-1} r_{i-1} / pivot_{i-1}: a sum of
        # positive terms, free of the cancellation that huge weights cause in diag - off * cp
        r = 1.0
        den = r - off[0]
        cp[0] = off[0] / den
        dp[0] = grad[0] / den
        for i in range(1, n):
            w_prev = -off[i - 1]
            r = 1.0 + w_prev * r / den
            den = r - off[i] if i < n - 1 else r
            if i < n - 1:
                cp[i] = off[i] / den
            dp[i] = (grad[i] - off[i - 1] * dp[i - 1]) / den
        step[n - 1] = dp[n - 1]
        for i in range(n - 2, -1, -1):
            step[i] = dp[i] - cp[i] * step[i + 1]
        smax = 0.0
        scale = 0.0
        for i in range(n):
            smax = max(smax, abs(step[i]))
            scale = max(scale, abs(mu[i]))
        tiny = 4e-16 * max(scale, 1.0)
        if smax <= tiny or gnorm <= tiny:
            return mu, True
        lam = 1.0
        accepted = False
        for _ in range(60):
            ordered = True
            for i in range(n):
                trial[i] = mu[i] - lam * step[i]
            for i in range(n - 1):
                if not trial[i + 1] > trial[i]:
                    ordered = False
                    break
            if ordered:
                # near the optimum the decrease is below the rounding of the objective
                if smax <= 1e-9 * max(scale, 1.0) or _barrier(trial, a, c) <= fval:
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            return mu, gnorm <= 1e-10 * max(scale, 1.0)
        if lam == 1.0 and smax <= 1e-13 * max(scale, 1.0):
            # full quadratic-convergence step this small leaves only rounding behind
            for i in range(n):
                mu[i] = trial[i]
            return mu, True
        for i in range(n):
            mu[i] = trial[i]
        fval = _barrier(mu, a, c)
    return mu, True


@numba.njit(cache=True)
def _barrier_full(mu, a, c):
    val = 0.0
    n = mu.shape[0]
    for i in range(n):
        val += 0.5 * (mu[i] - a[i]) ** 2
        for k in range(i + 1, n):
            val -= c * math.log(mu[k] - mu[i])
    return val


@numba.njit(cache=True)
def _implicit_full(a, c):
    """Minimise the barrier functional with every pair implicit (dense Newton).

    Used only where particles cluster so tightly that even the interaction
    beyond nearest neighbours cannot be taken explicitly.  Returns ``(mu, ok)``.
    """
    n = a.shape[0]
    # the minimiser keeps gaps of order sqrt(c); starting with gaps >= sqrt(c)
    # keeps the Hessian weights O(1) instead of 1/gap^2
    mu = np.empty(n)
    mu[0] = a[0]
    spread = math.sqrt(c)
    for i in range(1, n):
        mu[i] = max(a[i], mu[i - 1] + spread)
    grad = np.empty(n)
    hess = np.empty((n, n))
    trial = np.empty(n)
    fval = _barrier_full(mu, a, c)
    for it in range(200):
        for i in range(n):
            grad[i] = mu[i] - a[i]
            hess[i, i] = 1.0
        for i in range(n):
            for k in range(i + 1, n):
                inv = 1.0 / (mu[k] - mu[i])
                grad[i] += c * inv
                grad[k] -= c * inv
                w = c * inv * inv
                hess[i, i] += w
                hess[k, k] += w
                hess[i, k] = -w
                hess[k, i] = -w
        step = np.linalg.solve(hess, grad)
        smax = 0.0
        scale = 0.0
        gnorm = 0.0
        for i in range(n):
            smax = max(smax, abs(step[i]))
            scale = max(scale, abs(mu[i]))
            gnorm = max(gnorm, abs(grad[i]))
        tiny = 4e-16 * max(scale, 1.0)
        if smax <= tiny or gnorm <= tiny:
            return mu, True
        lam = 1.0
        accepted = False
        for _ in range(60):
            ordered = True
            for i in range(n):
                trial[i] = mu[i] - lam * step[i]
            for i in range(n - 1):
                if not trial[i + 1] > trial[i]:
                    ordered = False
                    break
            if ordered:
                if smax <= 1e-9 * max(scale, 1.0) or _barrier_full(trial, a, c) <= fval:
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            return mu, gnorm <= 1e-10 * max(scale, 1.0)
        for i in range(n):
            mu[i] = trial[i]
        if lam == 1.0 and smax <= 1e-13 * max(scale, 1.0):
            return mu, True
        fval = _barrier_full(mu, a, c)
    return mu, True


@numba.njit(cache=True)
def _far_clear(s, h, n_total):
    """Whether every pair two or more labels apart is farther than the noise scale ``sqrt(2h/N)``.

    If not, the far interaction changes within the step and cannot be frozen
    or taken explicitly.
    """
    r = math.sqrt(2.0 * h / n_total)
    for i in range(s.shape[0] - 2):
        if s[i + 2] - s[i] < r:
            return False
    return True


@numba.njit(cache=True)
def _moves_ok(old, move, frac):
    n = old.shape[0]
    for i in range(n):
        gap = np.inf
        if i > 0:
            gap = old[i] - old[i - 1]
        if i < n - 1:
            gap = min(gap, old[i + 1] - old[i])
        if abs(move[i]) > frac * gap:
            return False
    return True


@dataclass(frozen=True)
class DriftOpts:
    noise: bool = True
    interaction: bool = True
    max_halvings: int = 20
    move_fraction: float | None = 0.5
    record_every: int = 1
    record: bool = True


@dataclass
class StepStats:
    accepted: int = 0
    halvings: int = 0
    min_dt: float = math.inf
    floor_steps: int = 0


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def break_ties(initial) -> tuple[np.ndarray, bool]:
    """Return a strictly increasing copy, nudging ties by ``i * 1e-12 * spread``."""
    x = np.array(initial, dtype=float)
    if np.any(np.diff(x) < 0):
        raise ValueError("initial data must be sorted")
    if x.size < 2 or np.all(np.diff(x) > 0):
        return x, False
    spread = x[-1] - x[0] if x[-1] > x[0] else 1.0
    return x + np.arange(x.size) * 1e-12 * spread, True


@numba.njit(cache=True)
def _propose(s, far_rate, noise_row, h, n_total, use_noise, use_interaction, noise_scale):
    a = s.copy()
    if use_interaction:
        a += h * far_rate
    if use_noise:
        a += noise_scale * noise_row
    c = h / n_total if use_interaction else 0.0
    return _implicit_nn(a, s, c)


@numba.njit(cache=True)
def _run_engine(states, maps, pool_size, t_end, dt, gen, use_noise, use_interaction,
                max_halvings, frac, record, every):
    """Adaptive stepping of ``P`` systems sharing one pool of Brownian motions.

    Halving is depth-first with an explicit stack, so the random draws come in
    the same order as a recursive implementation would make them.  The
    interaction beyond nearest neighbours is evaluated once per nominal step
    and held fixed across its substeps, unless a rejection shows that it
    alone breaks the move rule; then it is re-evaluated at every remaining
    substep of that nominal step.  At the halving floor such a step is taken
    fully implicitly.
    """
    n_sys, n = states.shape
    noise_scale = math.sqrt(2.0 / n)
    nsteps = int(math.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    n_rec = (nsteps + every - 1) // every + 1 if record else 1
    times = np.zeros(n_rec)
    values = np.zeros((n_rec, n_sys, n))
    incs = np.zeros((max(n_rec - 1, 0), pool_size))
    values[0] = states
    # accepted, halvings, floor_steps, status (0 ok, 1 collapse), fail_t, fail_h, min_dt
    stats = np.zeros(7)
    stats[6] = np.inf
    st_h = np.zeros(max_halvings + 2)
    st_t = np.zeros(max_halvings + 2)
    st_d = np.zeros(max_halvings + 2, dtype=np.int64)
    st_db = np.zeros((max_halvings + 2, pool_size))
    cand = np.zeros((n_sys, n))
    far = np.zeros((n_sys, n))
    acc = np.zeros(pool_size)
    rec = 1
    for m in range(nsteps):
        t0 = m * dt
        h0 = min(dt, t_end - t0)
        if h0 <= 0:
            break
        dB = gen.standard_normal(pool_size) * math.sqrt(h0)
        if use_interaction:
            for p in range(n_sys):
                far[p] = _interaction_far(states[p]) / n
        refresh = False
        top = 0
        st_h[0] = h0
        st_t[0] = t0
        st_d[0] = 0
        st_db[0] = dB
        while top >= 0:
            h = st_h[top]
            t = st_t[top]
            depth = st_d[top]
            db = st_db[top].copy()
            top -= 1
            floor = depth >= max_halvings
            good = True
            if refresh:
                for p in range(n_sys):
                    far[p] = _interaction_far(states[p]) / n
            for p in range(n_sys):
                far_ok = (not use_interaction) or _far_clear(states[p], h, n)
                if floor and not far_ok:
                    # a tight cluster: take every pair implicitly
                    a = states[p] + noise_scale * db[maps[p]] if use_noise else states[p].copy()
                    mu, ok = _implicit_full(a, h / n)
                else:
                    mu, ok = _propose(states[p], far[p], db[maps[p]], h, n, use_noise, use_interaction, noise_scale)
                if not ok:
                    if floor:
                        stats[3] = 1.0
                        stats[4] = t
                        stats[5] = h
                        return times[:rec], values[:rec], incs[:max(rec - 1, 0)], stats
                    good = False
                    break
                if not floor and not _moves_ok(states[p], mu - states[p], frac):
                    if not far_ok:
                        # the far drift frozen at the step start is stale: re-evaluate per substep
                        refresh = True
                    good = False
                    break
                cand[p] = math.exp(-h / 2) * mu
            if good:
                for p in range(n_sys):
                    states[p] = cand[p]
                stats[0] += 1
                if floor:
                    stats[2] += 1
                stats[6] = min(stats[6], h)
                continue
            stats[1] += 1
            z = gen.standard_normal(pool_size)
            first = 0.5 * db + 0.5 * math.sqrt(h) * z
            second = db - first
            top += 1
            st_h[top] = h / 2
            st_t[top] = t + h / 2
            st_d[top] = depth + 1
            st_db[top] = second
            top += 1
            st_h[top] = h / 2
            st_t[top] = t
            st_d[top] = depth + 1
            st_db[top] = first
        if record:
            acc += dB
            if (m + 1) % every == 0 or m == nsteps - 1:
                times[rec] = t0 + h0
                values[rec] = states
                incs[rec - 1] = acc
                acc[:] = 0.0
                rec += 1
    if not record:
        times = np.array([0.0, t_end])
        out = np.zeros((2, n_sys, n))
        out[1] = states
        return times, out, incs[:0], stats
    return times[:rec], values[:rec], incs[:rec - 1], stats


def _integrate(states, maps, pool_size, t_end, dt, rng, opts: DriftOpts):
    gen = _generator(rng)
    st = np.array(states, dtype=float)
    init = st.copy()
    frac = math.inf if opts.move_fraction is None else float(opts.move_fraction)
    times, values, incs, raw = _run_engine(st, np.asarray(maps, dtype=np.int64), int(pool_size), float(t_end),
                                           float(dt), gen, bool(opts.noise), bool(opts.interaction),
                                           int(opts.max_halvings), frac, bool(opts.record),
                                           max(1, int(opts.record_every)))
    if raw[3]:
        raise StepCollapse(f"ordering could not be kept at t={raw[4]:.6g} even with dt={raw[5]:.3g}",
                           float(raw[4]), float(raw[5]))
    if not opts.record:
        values[0] = init
    stats = StepStats(int(raw[0]), int(raw[1]), float(raw[6]), int(raw[2]))
    return times, values, incs, stats


@dataclass(frozen=True)
class Trajectory:
    """A single DBM path in macroscopic units, sampled at nominal step boundaries.

    ``increments[m]`` is the Brownian increment accumulated between snapshots
    ``m`` and ``m + 1``; substeps taken inside a nominal step are not stored.
    """

    times: np.ndarray
    values: np.ndarray
    increments: np.ndarray | None
    perturbed: bool
    stats: StepStats = field(compare=False)

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]


def integrate_dbm(initial, t_end: float, dt: float, rng, drift_opts: DriftOpts | None = None) -> Trajectory:
    """Integrate the DBM from sorted ``initial`` for time ``t_end`` with nominal step ``dt``."""
    opts = drift_opts or DriftOpts()
    x0, perturbed = break_ties(initial)
    n = x0.size
    times, values, incs, stats = _integrate(x0[None, :], np.arange(n)[None, :], n, t_end, dt, rng, opts)
    return Trajectory(times, values[:, 0, :], incs if opts.record else None, perturbed, stats)


@dataclass(frozen=True)
class CoupledTrajectory:
    """Two DBMs driven by the same Brownian motions, y's labels shifted by ``k0 - j0``.

    ``x`` and ``y`` are macroscopic paths of shape ``(len(times), N)``; ``pool``
    holds the Brownian increments, ``x`` reading column ``offset + i`` and ``y``
    reading column ``offset + i + k0 - j0``.
    """

    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    pool: np.ndarray
    offset: int
    k0: int
    j0: int
    t0: float
    noise_seed: int
    stats: StepStats = field(compare=False)

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def shift(self) -> int:
        return self.k0 - self.j0

    def x_increments(self) -> np.ndarray:
        return self.pool[:, self.offset:self.offset + self.n]

    def y_increments(self) -> np.ndarray:
        lo = self.offset + self.shift
        return self.pool[:, lo:lo + self.n]

    @property
    def micro_times(self) -> np.ndarray:
        return self.n * self.times

    def micro(self, which: str = "x", labels=None) -> np.ndarray:
        """Microscopic coordinates ``N * path[:, center + j]`` for the labels ``j`` (default all)."""
        path, center = (self.x, self.k0) if which == "x" else (self.y, self.j0)
        if labels is None:
            return self.n * path
        return self.n * path[:, center + np.asarray(labels)]


def integrate_coupled(x0, y0, k0: int, j0: int, t_end: float, dt: float, rng,
                      drift_opts: DriftOpts | None = None, *, t0: float = 0.0) -> CoupledTrajectory:
    """Advance both systems with shared increments: y_i uses the motion of x_{i + k0 - j0}.

    Labels whose shifted partner falls outside ``0 .. N-1`` get their own
    independent motions from the pool.
    """
    opts = drift_opts or DriftOpts()
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    if x0.shape != y0.shape:
        raise ValueError("x0 and y0 must have the same length")
    for arr, name in ((x0, "x0"), (y0, "y0")):
        if np.any(np.diff(arr) <= 0):
            raise ValueError(f"{name} must be strictly increasing")
    n = x0.size
    d = k0 - j0
    offset = max(0, -d)
    pool_size = n + abs(d)
    maps = [offset + np.arange(n), offset + d + np.arange(n)]
    seed = rng.master_seed if isinstance(rng, RngStream) else -1
    times, values, pool, stats = _integrate(np.vstack([x0, y0]), np.vstack(maps), pool_size, t_end, dt, rng, opts)
    return CoupledTrajectory(times, values[:, 0, :], values[:, 1, :], pool, offset,
                             int(k0), int(j0), float(t0), seed, stats)


# ------------------------------------------------------- derived dynamics


def _path_and_center(traj, which: str):
    if isinstance(traj, CoupledTrajectory):
        return (traj.x, traj.k0) if which == "x" else (traj.y, traj.j0)
    return traj.values, traj.values.shape[1] // 2


@dataclass(frozen=True)
class RegularizedPaths:
    """``x_hat`` in microscopic units together with ``x_hat - x``."""

    times: np.ndarray
    x_hat: np.ndarray
    deviation: np.ndarray
    epsilon: float

    @property
    def sup_deviation(self) -> float:
        return float(np.max(np.abs(self.deviation))) if self.deviation.size else 0.0


def integrate_regularized(traj, epsilon: float = 1e-12, *, which: str = "x") -> RegularizedPaths:
    """Regularised process: drift ``sum_j 1/(x_k - x_j + eps_kj)`` evaluated on the stored path.

    ``epsilon`` is in macroscopic units (it is multiplied by N internally) and
    the process reuses the stored noise, so only the deterministic difference
    ``x_hat - x`` needs to be integrated.  The contraction that the difference
    itself feels is dropped, which can only overstate the deviation.
    """
    path, _ = _path_and_center(traj, which)
    n = path.shape[1]
    times = traj.times
    micro = n * path
    eps = n * float(epsilon)
    dev = np.zeros_like(micro)
    if eps != 0.0:
        for m in range(1, times.size):
            h = n * (times[m] - times[m - 1])
            x = micro[m - 1]
            diff = _interaction(x, eps) - _interaction(x, 0.0)
            dev[m] = math.exp(-h / (2 * n)) * (dev[m - 1] + h * diff)
    return RegularizedPaths(n * times, micro + dev, dev, float(epsilon))


def window_laplacian(a, b, eps: float = 0.0) -> np.ndarray:
    """Graph Laplacian of ``B_jl = 1/((a_j - a_l + e_jl)(b_j - b_l + e_jl))``, ``e_jl = eps * sign(j - l)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    idx = np.arange(a.size)
    e = eps * np.sign(idx[:, None] - idx[None, :])
    with np.errstate(divide="ignore"):
        B = 1.0 / ((a[:, None] - a[None, :] + e) * (b[:, None] - b[None, :] + e))
    np.fill_diagonal(B, 0.0)
    L = -B
    np.fill_diagonal(L, B.sum(axis=1))
    return L


@dataclass(frozen=True)
class ShortRangePaths:
    """Cut-off paths on the window ``|j| <= K`` (microscopic, labels relative to the center)."""

    times: np.ndarray
    labels: np.ndarray
    x_hat: np.ndarray
    x_tilde: np.ndarray
    K: int

    def cutoff_error(self) -> np.ndarray:
        """``(x_hat - x_tilde)`` on the window, shape ``(len(times), 2K+1)``."""
        return self.x_hat - self.x_tilde

    def lemma_observable(self) -> float:
        """``sup_t max_{|a|<=|b|<=K} |e_a - e_b| sqrt(K-|a|+1) sqrt(K-|b|+1) / |a-b|``."""
        err = self.cutoff_error()
        lab = self.labels
        w = np.sqrt(self.K - np.abs(lab) + 1.0)
        da = np.abs(lab[:, None] - lab[None, :]).astype(float)
        mask = (np.abs(lab)[:, None] <= np.abs(lab)[None, :]) & (da > 0)
        best = 0.0
        for row in err:
            diff = np.abs(row[:, None] - row[None, :]) * w[:, None] * w[None, :]
            vals = np.where(mask, diff / np.where(da > 0, da, 1.0), 0.0)
            best = max(best, float(vals.max()))
        return best

    def gap_error(self, a: int, b: int) -> np.ndarray:
        """``|(x_hat_a - x_hat_b) - (x_tilde_a - x_tilde_b)|`` over time."""
        ia = int(np.searchsorted(self.labels, a))
        ib = int(np.searchsorted(self.labels, b))
        err = self.cutoff_error()
        return np.abs(err[:, ia] - err[:, ib])


def integrate_shortrange(traj, K: int, epsilon: float = 1e-12, *, which: str = "x",
                         regularized: RegularizedPaths | None = None) -> ShortRangePaths:
    """Truncate the drift to ``|l| <= K`` around the center label and integrate on the stored path.

    With ``w = x_tilde - x_hat`` on the window, the exact identity
    ``D_K(x_tilde) - D_K(x_hat) = -L w`` (L the window Laplacian of the
    kernel built from both configurations) gives

        dw = -L w dtau - F dtau,   F_j = sum_{|l| > K} 1/(x_hat_j - x_hat_l + eps_jl)

    which is stepped by implicit Euler with L lagged by one snapshot.
    """
    path, center = _path_and_center(traj, which)
    n = path.shape[1]
    if K < 1:
        raise ValueError("K must be at least 1")
    lo = max(0, center - K)
    hi = min(n, center + K + 1)
    labels = np.arange(lo, hi) - center
    reg = regularized if regularized is not None else integrate_regularized(traj, epsilon, which=which)
    eps = n * float(epsilon)
    times = traj.times
    x_hat = reg.x_hat[:, lo:hi]
    w = np.zeros((times.size, hi - lo))
    if lo > 0 or hi < n:
        eye = np.eye(hi - lo)
        for m in range(1, times.size):
            h = n * (times[m] - times[m - 1])
            xh = reg.x_hat[m - 1]
            forcing = _interaction_outside(xh, lo, hi, eps)
            lap = window_laplacian(xh[lo:hi], xh[lo:hi] + w[m - 1], eps)
            w[m] = math.exp(-h / (2 * n)) * np.linalg.solve(eye + h * lap, w[m - 1] - h * forcing)
    return ShortRangePaths(n * times, labels, x_hat, x_hat + w, int(K))


def gap_difference_sup(traj: CoupledTrajectory, width: int = 5) -> np.ndarray:
    """``sup_{|j|,|j'| <= width} |(x_j - x_j') - (y_j - y_j')|`` in microscopic units, per time."""
    lab = np.arange(-width, width + 1)
    u = traj.micro("x", lab) - traj.micro("y", lab)
    return u.max(axis=1) - u.min(axis=1)


def path_rigidity_fraction(traj: CoupledTrajectory, *, lo_exp: float = 0.1, hi_exp: float = 0.4,
                           band=(0.1, 10.0), labels=None, max_times: int = 50) -> float:
    """Fraction of ``(i, j, t)`` with ``N^lo <= |i-j| <= N^hi`` whose ratio ``|x_i - x_j|/|i-j|`` lies in ``band``."""
    n = traj.n
    dmin = max(1, int(math.ceil(n ** lo_exp)))
    dmax = int(math.floor(n ** hi_exp))
    if labels is None:
        half = min(traj.k0, n - 1 - traj.k0, traj.j0, n - 1 - traj.j0) // 2
        labels = np.arange(-half, half + 1)
    idx_t = np.unique(np.linspace(0, traj.times.size - 1, min(max_times, traj.times.size)).astype(int))
    inside = total = 0
    for which in ("x", "y"):
        pts = traj.micro(which, labels)[idx_t]
        for dist in range(dmin, dmax + 1):
            ratio = np.abs(pts[:, dist:] - pts[:, :-dist]) / dist
            inside += int(np.count_nonzero((ratio >= band[0]) & (ratio <= band[1])))
            total += ratio.size
    return inside / total if total else 1.0
