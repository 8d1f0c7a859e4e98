"""Discrete parabolic equation of the coupled difference process.

For two coupled DBMs in microscopic units, with window labels ``|j| <= K``,

    B_jl(tau) = 1 / ((x_j - x_l + e_jl) (y_j - y_l + e_jl)),   e_jl = eps * sign(j - l)

and the flow is taken in contraction form ``dv = -L v dtau`` where ``L`` is
the graph Laplacian of ``B``.  The kernel is held constant on each snapshot
interval of the underlying trajectory.  On such an interval the flow map is
built from Crank-Nicolson steps of size ``ds <= 0.5 / max_j L_jj``; the step
count is a power of two, so the map is assembled by repeated squaring of the
one-step matrix.  Each Crank-Nicolson factor is entrywise non-negative with
unit row sums under that step bound, which makes every product a stochastic
matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dbm import CoupledTrajectory, ShortRangePaths, integrate_regularized, window_laplacian
from .errors import KernelSingular


@dataclass(frozen=True)
class ParabolicKernel:
    """Window paths ``a`` (x side) and ``b`` (y side), shape ``(len(times), 2K+1)``."""

    times: np.ndarray
    a: np.ndarray
    b: np.ndarray
    labels: np.ndarray
    epsilon: float = 0.0

    def __post_init__(self):
        if self.a.shape != self.b.shape or self.a.shape[0] != self.times.size:
            raise ValueError("kernel paths must share the time axis and window")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("kernel times must be strictly increasing")

    @classmethod
    def from_coupled(cls, traj: CoupledTrajectory, K: int, epsilon: float = 0.0, *,
                     offset: int = 0) -> "ParabolicKernel":
        """Harvest the kernel on the ``2K+1`` labels centred at ``offset``; ``epsilon`` in macroscopic units.

        The label shift between the two processes is global, so any window
        ``(k0 + offset, j0 + offset)`` of one run is also a coupled window.
        """
        if K < 1:
            raise ValueError("K must be at least 1")
        labels = np.arange(-K, K + 1)
        for center in (traj.k0 + offset, traj.j0 + offset):
            if center - K < 0 or center + K >= traj.n:
                raise ValueError(f"window |j| <= {K} around index {center} leaves 0..{traj.n - 1}")
        shifted = labels + int(offset)
        # labels stay relative to the window centre
        return cls(traj.micro_times.copy(), traj.micro("x", shifted), traj.micro("y", shifted), labels,
                   traj.n * float(epsilon))

    @property
    def K(self) -> int:
        return int(self.labels.max())

    @property
    def size(self) -> int:
        return self.labels.size

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    def laplacian(self, m: int) -> np.ndarray:
        lap = window_laplacian(self.a[m], self.b[m], self.epsilon)
        if not np.all(np.isfinite(lap)):
            raise KernelSingular(f"kernel is not finite at snapshot {m} (tau={self.times[m]:.6g})")
        return lap

    def B(self, m: int) -> np.ndarray:
        lap = self.laplacian(m)
        out = -lap
        np.fill_diagonal(out, 0.0)
        return out


@dataclass(frozen=True)
class PropagatorMatrix:
    """``v(t) = matrix @ v(s)`` on the window labels."""

    matrix: np.ndarray
    s: float
    t: float
    labels: np.ndarray
    intervals: int
    max_doublings: int

    def row_sum_error(self) -> float:
        return float(np.max(np.abs(self.matrix.sum(axis=1) - 1.0)))

    def min_entry(self) -> float:
        return float(self.matrix.min())


def _cn_flow(lap: np.ndarray, duration: float, step_factor: float) -> tuple[np.ndarray, int]:
    """Flow map of ``dv = -L v`` over ``duration`` with ``2**k`` Crank-Nicolson steps."""
    m = lap.shape[0]
    eye = np.eye(m)
    if duration <= 0:
        return eye, 0
    rate = float(np.max(np.diag(lap)))
    k = 0
    if rate > 0:
        k = max(0, int(math.ceil(math.log2(duration * rate / step_factor))))
    ds = duration / 2 ** k
    half = 0.5 * ds * lap
    step = np.linalg.solve(eye + half, eye - half)
    for _ in range(k):
        step = step @ step
    return step, k


def _segments(kernel: ParabolicKernel, s: float, t: float):
    """``(snapshot index, start, stop)`` for the constant-kernel pieces covering ``[s, t]``."""
    tol = 1e-12 * max(1.0, abs(kernel.end))
    if s < kernel.start - tol or t > kernel.end + tol or t < s - tol:
        raise ValueError(f"need start <= s <= t <= end, got s={s}, t={t} on [{kernel.start}, {kernel.end}]")
    times = kernel.times
    m = int(np.clip(np.searchsorted(times, s, side="right") - 1, 0, times.size - 2)) if times.size > 1 else 0
    cur = s
    while cur < t - tol and m < times.size - 1:
        stop = min(t, times[m + 1])
        if stop > cur:
            yield m, cur, stop
        cur = stop
        m += 1


def propagator(kernel: ParabolicKernel, s: float, t: float, *, step_factor: float = 0.5) -> PropagatorMatrix:
    """Time-ordered product of the per-interval flow maps from ``s`` to ``t``."""
    U = np.eye(kernel.size)
    count = 0
    deepest = 0
    for m, lo, hi in _segments(kernel, s, t):
        flow, k = _cn_flow(kernel.laplacian(m), hi - lo, step_factor)
        U = flow @ U
        count += 1
        deepest = max(deepest, k)
    return PropagatorMatrix(U, float(s), float(t), kernel.labels, count, deepest)


def evolve_parabolic(kernel: ParabolicKernel, v0, s: float, t: float, *, step_factor: float = 0.5,
                     record: bool = False):
    """Evolve ``v0`` from ``s`` to ``t``; with ``record`` return ``(times, values)`` at every piece end."""
    v = np.array(v0, dtype=float)
    if v.shape != (kernel.size,):
        raise ValueError(f"v0 must have length {kernel.size}")
    times = [float(s)]
    values = [v.copy()]
    for m, lo, hi in _segments(kernel, s, t):
        flow, _ = _cn_flow(kernel.laplacian(m), hi - lo, step_factor)
        v = flow @ v
        if record:
            times.append(float(hi))
            values.append(v.copy())
    if record:
        return np.array(times), np.array(values)
    return v


# ------------------------------------------------------------ diagnostics


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    distances: np.ndarray
    envelope: np.ndarray
    row: int


def decay_envelope(prop: PropagatorMatrix, a: int = 0, *, floor: float = 1e-300) -> DecayFit:
    """Least-squares exponent of ``max_{|p-a|=d} |U_ap|`` against ``d + 1`` on log-log axes."""
    labels = prop.labels
    row = int(np.searchsorted(labels, a))
    vals = np.abs(prop.matrix[row])
    dist = np.abs(labels - a)
    ds = np.arange(1, dist.max() + 1)
    env = np.array([vals[dist == d].max() for d in ds])
    keep = env > floor
    if keep.sum() < 2:
        return DecayFit(float("nan"), ds, env, a)
    slope = np.polyfit(np.log(ds[keep] + 1.0), np.log(env[keep]), 1)[0]
    return DecayFit(float(slope), ds, env, a)


def local_oscillation(v, labels, radius: float) -> float:
    """``sup_{|j| + |j'| <= radius} |v_j - v_j'|``."""
    v = np.asarray(v)
    lab = np.abs(np.asarray(labels))
    inside = lab <= radius
    vv = v[inside]
    ll = lab[inside]
    ok = (ll[:, None] + ll[None, :]) <= radius
    if not ok.any():
        return 0.0
    return float(np.max(np.where(ok, np.abs(vv[:, None] - vv[None, :]), 0.0)))


@dataclass(frozen=True)
class HolderResult:
    sigmas: np.ndarray
    ratios: np.ndarray
    exponent: float
    threshold: float

    @property
    def passes(self) -> bool:
        return bool(np.isfinite(self.exponent) and self.exponent > self.threshold)

    @property
    def decay_ratio(self) -> np.ndarray:
        return self.ratios


def holder_check(kernel: ParabolicKernel, v0, sigma, *, threshold: float = 0.05,
                 step_factor: float = 0.5) -> HolderResult:
    """Oscillation decay of the parabolic flow.

    For each ``sigma`` the flow runs from the kernel start; the ratio is the
    largest ``sup_{|j|+|j'| <= sigma^(2/3)} |v_j - v_j'|`` over the times in
    ``[sigma - sigma^(1/3), sigma]`` divided by ``||v0||_inf``.  The exponent
    is minus the log-log slope of ratio against sigma.
    """
    sigmas = np.sort(np.atleast_1d(np.asarray(sigma, dtype=float)))
    v0 = np.asarray(v0, dtype=float)
    norm = float(np.max(np.abs(v0)))
    t_max = kernel.start + sigmas[-1]
    if t_max > kernel.end * (1 + 1e-12):
        raise ValueError(f"kernel covers {kernel.end - kernel.start:.4g} time units, sigma needs {sigmas[-1]:.4g}")
    times, values = evolve_parabolic(kernel, v0, kernel.start, t_max, step_factor=step_factor, record=True)
    ratios = np.zeros(sigmas.size)
    if norm > 0:
        for k, sg in enumerate(sigmas):
            lo = kernel.start + sg - sg ** (1.0 / 3.0)
            hi = kernel.start + sg
            sel = np.flatnonzero((times >= lo - 1e-12) & (times <= hi + 1e-12))
            if sel.size == 0:
                sel = np.array([int(np.argmin(np.abs(times - hi)))])
            radius = sg ** (2.0 / 3.0)
            ratios[k] = max(local_oscillation(values[i], kernel.labels, radius) for i in sel) / norm
    exponent = float("nan")
    pos = ratios > 0
    if pos.sum() >= 2:
        exponent = -float(np.polyfit(np.log(sigmas[pos]), np.log(ratios[pos]), 1)[0])
    elif norm > 0 and pos.sum() == 0:
        exponent = float("inf")
    return HolderResult(sigmas, ratios, exponent, threshold)


@dataclass(frozen=True)
class DuhamelResult:
    times: np.ndarray
    residual: np.ndarray
    central_sup: float
    xi_sup: float
    xi_by_label: np.ndarray
    labels: np.ndarray


def duhamel_residual(traj: CoupledTrajectory, K: int, *, epsilon: float = 1e-12,
                     x_short: ShortRangePaths | None = None, y_short: ShortRangePaths | None = None,
                     step_factor: float = 0.5) -> DuhamelResult:
    """Compare ``u = exp(tau/2N)(x_tilde - y_tilde)`` with the parabolic solution ``v``, ``v(0) = u(0)``.

    ``v`` uses the kernel of the full (regularised) paths; the forcing that
    closes the equation for ``u`` is ``xi_j = sum_l (B_jl - B~_jl)(u_j - u_l)``,
    ``B~`` being the kernel of the cut-off paths.  The residual is reported on
    ``|a| <= sqrt(K)``.
    """
    from .dbm import integrate_shortrange

    n = traj.n
    rx = integrate_regularized(traj, epsilon, which="x")
    ry = integrate_regularized(traj, epsilon, which="y")
    xs = x_short or integrate_shortrange(traj, K, epsilon, which="x", regularized=rx)
    ys = y_short or integrate_shortrange(traj, K, epsilon, which="y", regularized=ry)
    labels = np.arange(-K, K + 1)
    eps = n * float(epsilon)
    tau = traj.micro_times
    kernel = ParabolicKernel(tau.copy(), rx.x_hat[:, traj.k0 - K:traj.k0 + K + 1],
                             ry.x_hat[:, traj.j0 - K:traj.j0 + K + 1], labels, eps)
    growth = np.exp(tau / (2 * n))[:, None]
    u = growth * (xs.x_tilde - ys.x_tilde)
    _, v = evolve_parabolic(kernel, u[0], tau[0], tau[-1], step_factor=step_factor, record=True)
    residual = np.abs(u - v)
    central = np.abs(labels) <= math.sqrt(K)
    xi = np.zeros_like(u)
    for m in range(tau.size):
        lap_full = kernel.laplacian(m)
        lap_cut = window_laplacian(xs.x_tilde[m], ys.x_tilde[m], eps)
        xi[m] = (lap_full - lap_cut) @ u[m]
    xi_lab = np.max(np.abs(xi), axis=0)
    return DuhamelResult(tau, residual, float(residual[:, central].max()), float(xi_lab.max()), xi_lab, labels)
