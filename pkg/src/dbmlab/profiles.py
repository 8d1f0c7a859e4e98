"""Deterministic initial data V and its regularity metadata."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ProfileError


@dataclass(frozen=True)
class PotentialProfile:
    """Sorted diagonal entries ``V_1 <= ... <= V_N`` with the scales (ell, G, E0).

    ``ell`` is the smallest scale on which the density of states of V is
    controlled, ``window`` (G) the half-width of the energy window around
    ``center`` (E0) where that control holds.  ``ell`` defaults to 1/N.
    """

    entries: np.ndarray
    ell: float | None = None
    window: float = 0.5
    center: float = 0.0
    bound_exponent: float = 1.0
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.array(self.entries, dtype=float).ravel()
        if v.size == 0:
            raise ProfileError("profile has no entries")
        if not np.all(np.isfinite(v)):
            raise ProfileError("profile entries must be finite")
        if np.any(np.diff(v) < 0):
            raise ProfileError("profile entries must be sorted ascending")
        n = v.size
        ell = 1.0 / n if self.ell is None else float(self.ell)
        if ell < 1.0 / n * (1 - 1e-12):
            raise ProfileError(f"ell={ell} is below 1/N={1.0 / n}")
        if not self.window > ell:
            raise ProfileError(f"regularity separation requires G > ell (got G={self.window}, ell={ell})")
        if np.max(np.abs(v)) > float(n) ** self.bound_exponent and n > 1:
            raise ProfileError(f"max |V_i| exceeds N^B_V with B_V={self.bound_exponent}")
        v.setflags(write=False)
        object.__setattr__(self, "entries", v)
        object.__setattr__(self, "ell", ell)

    @property
    def n(self) -> int:
        return self.entries.size

    def __len__(self) -> int:
        return self.entries.size

    @property
    def has_ties(self) -> bool:
        return bool(np.any(np.diff(self.entries) == 0))

    def describe(self) -> dict:
        return {
            "name": self.name,
            "N": self.n,
            "ell": self.ell,
            "G": self.window,
            "E0": self.center,
            "B_V": self.bound_exponent,
            **self.params,
        }


def uniform(n: int, *, ell: float | None = None, window: float = 0.5, center: float = 0.0) -> PotentialProfile:
    """N equally spaced points on [-1, 1] (density 1/2)."""
    v = np.linspace(-1.0, 1.0, n) if n > 1 else np.zeros(1)
    return PotentialProfile(v, ell=ell, window=window, center=center, name="uniform")


def two_atom(n: int, *, ell: float | None = None, window: float = 0.3, center: float = 1.0,
             separation: float = 1.0) -> PotentialProfile:
    """Half the entries at ``-separation``, the rest at ``+separation``.

    The measure is atomic, so it is *not* regular at any scale below O(1); it
    is the standard counterexample and the workhorse for short-time smoothing.
    """
    lo = n // 2
    v = np.concatenate([np.full(lo, -separation), np.full(n - lo, separation)])
    return PotentialProfile(v, ell=ell, window=window, center=center, name="two_atom",
                            params={"separation": separation})


def rough(n: int, ell: float, *, scale: float = 1.0, window: float = 0.5, center: float = 0.0) -> PotentialProfile:
    """Quantiles of the density ``1 + sin(2 pi E / ell') / 2`` on [-1, 1], ``ell' = ell * scale``.

    The density oscillates on the scale ``ell'`` so Im m_V is only stable
    down to roughly that scale.
    """
    period = ell * scale
    k = 2 * np.pi / period

    def cdf(x):
        return (x + 1) - (np.cos(k * x) - np.cos(-k)) / (2 * k)

    total = cdf(np.array(1.0))
    targets = (np.arange(n) + 0.5) / n * total
    lo = np.full(n, -1.0)
    hi = np.full(n, 1.0)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = cdf(mid) < targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    v = 0.5 * (lo + hi)
    return PotentialProfile(v, ell=ell, window=window, center=center, name="rough",
                            params={"scale": scale})


def zeros(n: int, *, ell: float | None = None, window: float = 1.0, center: float = 0.0) -> PotentialProfile:
    """V identically zero: the deformed ensemble reduces to a scaled GOE."""
    return PotentialProfile(np.zeros(n), ell=ell, window=window, center=center, name="zero")


PRESETS = {"uniform": uniform, "two_atom": two_atom, "rough": rough, "zero": zeros}


def from_preset(name: str, n: int, **kwargs) -> PotentialProfile:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ProfileError(f"unknown profile preset {name!r}; expected one of {sorted(PRESETS)}") from None
    return factory(n, **kwargs)


def load_profile(path: str | Path, **kwargs) -> PotentialProfile:
    """Read a single-column text file of V entries (sorted on load)."""
    values = np.loadtxt(path, dtype=float, ndmin=1)
    if values.ndim != 1:
        raise ProfileError(f"{path}: expected a single column of values")
    return PotentialProfile(np.sort(values), name=Path(path).stem, **kwargs)
