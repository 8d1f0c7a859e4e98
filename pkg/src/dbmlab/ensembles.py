"""GOE and deformed-GOE sampling at fixed times, with empirical spectral statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigen import eigenvalues_symmetric
from .freeconv import _as_z, coefficients
from .profiles import PotentialProfile
from .rng import RngStream


@dataclass(frozen=True)
class EnsembleSample:
    eigenvalues: np.ndarray
    time: float
    seed: int
    sample_index: int = 0
    profile_id: str = "goe"

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        if np.any(np.diff(ev) < 0):
            raise ValueError("eigenvalues must be sorted ascending")
        ev.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def n(self) -> int:
        return self.eigenvalues.size


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_goe(n: int, rng) -> np.ndarray:
    """Symmetric W with off-diagonal variance 1/N and diagonal variance 2/N."""
    if n < 1:
        raise ValueError("N must be positive")
    g = _generator(rng).standard_normal((n, n))
    return (g + g.T) / np.sqrt(2.0 * n)


def deformed_matrix(profile: PotentialProfile, t: float, rng, *, form: str = "t") -> np.ndarray:
    alpha, s = coefficients(t, form)
    h = np.diag(alpha * profile.entries)
    if s > 0:
        h = h + np.sqrt(s) * sample_goe(profile.n, rng)
    return h


def sample_deformed(profile: PotentialProfile, t: float, rng: RngStream, *, form: str = "t") -> EnsembleSample:
    """Eigenvalues of ``exp(-t/2) diag(V) + sqrt(1 - exp(-t)) W`` (or ``V + sqrt(T) W``)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    h = deformed_matrix(profile, t, rng, form=form)
    ev = eigenvalues_symmetric(h, check=False)
    seed, idx = (rng.master_seed, rng.sample_index) if isinstance(rng, RngStream) else (-1, 0)
    return EnsembleSample(ev, float(t), seed, idx, profile.name)


def sample_goe_spectrum(n: int, rng: RngStream, *, a: float = 1.0, b: float = 0.0) -> EnsembleSample:
    """Eigenvalues of ``a W + b``."""
    ev = a * eigenvalues_symmetric(sample_goe(n, rng), check=False) + b
    seed, idx = (rng.master_seed, rng.sample_index) if isinstance(rng, RngStream) else (-1, 0)
    return EnsembleSample(ev, float("inf"), seed, idx, "goe")


def sample_many(profile: PotentialProfile | None, t: float, master_seed: int, count: int, *,
                n: int | None = None, form: str = "t", start: int = 0) -> list[EnsembleSample]:
    """``count`` independent samples with substreams ``start .. start + count - 1``.

    ``profile=None`` draws plain GOE spectra of size ``n``.
    """
    out = []
    for k in range(start, start + count):
        stream = RngStream(master_seed, k)
        if profile is None:
            out.append(sample_goe_spectrum(n, stream))
        else:
            out.append(sample_deformed(profile, t, stream, form=form))
    return out


def spectra(samples) -> np.ndarray:
    """Stack sample spectra into an ``(n_samples, N)`` array."""
    return np.vstack([s.eigenvalues if isinstance(s, EnsembleSample) else np.asarray(s) for s in samples])


def empirical_stieltjes(sample, z):
    """``(1/N) sum_i 1/(lambda_i - z)``."""
    ev = sample.eigenvalues if isinstance(sample, EnsembleSample) else np.asarray(sample, dtype=float)
    zs = _as_z(z)
    out = (1.0 / (ev[None, :] - zs[:, None])).mean(axis=1)
    return out[0] if np.ndim(z) == 0 else out


def counting_function(sample, energy):
    """Fraction of eigenvalues ``<= E`` (right-continuous)."""
    ev = sample.eigenvalues if isinstance(sample, EnsembleSample) else np.asarray(sample, dtype=float)
    e = np.asarray(energy, dtype=float)
    out = np.searchsorted(ev, e, side="right") / ev.size
    return float(out) if out.ndim == 0 else out
