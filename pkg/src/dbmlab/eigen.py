"""Eigenvalues of dense real symmetric matrices.

Householder reduction to tridiagonal form followed by the implicit-shift QL
iteration.  Only eigenvalues are produced; no reflector is accumulated.
"""

from __future__ import annotations

import math

import numba
import numpy as np

from .errors import NotSymmetric


@numba.njit(cache=True)
def _tridiagonalize(a):
    """Reduce symmetric ``a`` (overwritten) to tridiagonal ``(d, e)``, ``e[k]`` coupling k and k+1."""
    n = a.shape[0]
    d = np.empty(n)
    e = np.zeros(n)
    v = np.empty(n)
    p = np.empty(n)
    for k in range(n - 2):
        m = n - k - 1
        x0 = a[k + 1, k]
        sigma = 0.0
        for i in range(1, m):
            sigma += a[k + 1 + i, k] * a[k + 1 + i, k]
        d[k] = a[k, k]
        if sigma == 0.0:
            e[k] = x0
            continue
        norm = math.sqrt(x0 * x0 + sigma)
        alpha = -norm if x0 >= 0 else norm
        v[0] = x0 - alpha
        for i in range(1, m):
            v[i] = a[k + 1 + i, k]
        vnorm = math.sqrt(v[0] * v[0] + sigma)
        for i in range(m):
            v[i] /= vnorm
        e[k] = alpha
        # S <- H S H with H = I - 2 v v^T on the trailing block
        for i in range(m):
            acc = 0.0
            for j in range(m):
                acc += a[k + 1 + i, k + 1 + j] * v[j]
            p[i] = acc
        kk = 0.0
        for i in range(m):
            kk += v[i] * p[i]
        for i in range(m):
            p[i] -= kk * v[i]
        for i in range(m):
            vi = v[i]
            pi = p[i]
            for j in range(m):
                a[k + 1 + i, k + 1 + j] -= 2.0 * (vi * p[j] + pi * v[j])
    if n >= 2:
        d[n - 2] = a[n - 2, n - 2]
        e[n - 2] = a[n - 1, n - 2]
    d[n - 1] = a[n - 1, n - 1]
    return d, e


@numba.njit(cache=True)
def _tql(d, e):
    """Implicit-shift QL on a symmetric tridiagonal matrix; eigenvalues land in ``d``.

    Returns 0 on success, or the index of the eigenvalue that failed to converge plus one.
    """
    n = d.shape[0]
    eps = 2.220446049250313e-16
    # absolute deflation floor: entries below eps * ||T|| are at rounding level
    anorm = 0.0
    for i in range(n):
        anorm = max(anorm, abs(d[i]) + abs(e[i]))
    floor = eps * anorm
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd or abs(e[m]) <= floor:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > 60:
                return l + 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0 else -r))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return 0


def tridiagonal_eigenvalues(diag, offdiag) -> np.ndarray:
    d = np.array(diag, dtype=float)
    e = np.zeros(d.size)
    e[: d.size - 1] = offdiag
    scale = max(float(np.max(np.abs(d), initial=0.0)), float(np.max(np.abs(e), initial=0.0)))
    if scale == 0.0:
        return d
    d /= scale
    e /= scale
    status = _tql(d, e)
    if status:
        raise ArithmeticError(f"QL iteration did not converge for eigenvalue {status - 1}")
    return np.sort(d) * scale


def eigenvalues_symmetric(matrix, *, check: bool = True) -> np.ndarray:
    """All eigenvalues of a real symmetric matrix, ascending."""
    a = np.array(matrix, dtype=float, order="C")
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        return np.empty(0)
    if check:
        fro = np.linalg.norm(a)
        if np.linalg.norm(a - a.T) > 1e-12 * fro:
            raise NotSymmetric("matrix is not symmetric to 1e-12 relative Frobenius norm")
    a = 0.5 * (a + a.T)
    # rescale to unit max entry so squares neither underflow nor overflow
    scale = float(np.max(np.abs(a)))
    if scale == 0.0 or not np.isfinite(scale):
        if scale == 0.0:
            return np.zeros(a.shape[0])
        raise ArithmeticError("matrix has non-finite entries")
    d, e = _tridiagonalize(a / scale)
    status = _tql(d, e)
    if status:
        raise ArithmeticError(f"QL iteration did not converge for eigenvalue {status - 1}")
    return np.sort(d) * scale
