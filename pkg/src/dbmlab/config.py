"""Flat YAML experiment configs.

One document per experiment, one key per line.  Keys:

``kind``            freeconv | locallaw | rigidity | repulsion | couple | gapstats | holder | law
``N``               matrix size
``t`` / ``T``       time in the t-form or the T-form (at most one)
``profile``         preset name (uniform, two_atom, rough, zero) or ``file:<path>``
``ell``, ``G``, ``E0``, ``separation``   profile scales; the preset defaults apply when absent
``samples``         Monte Carlo count (paths for ``law``/``couple``, kernels for ``holder``)
``dt``              nominal DBM step (macroscopic time)
``K``               window half-width for ``couple``/``holder``
``omega_prime``     matching exponent; defaults to ``2 log K / log N``
``q``               bulk fraction (default 0.5)
``eps_grid``        list of gap thresholds for ``repulsion``
``threshold_<m>``   overrides the pass threshold of metric ``m``
``seed``            master seed (the CLI ``--seed`` wins)
``out``             output directory

Kind-specific extras are listed in :data:`EXTRA_KEYS`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigInvalid

KINDS = ("freeconv", "locallaw", "rigidity", "repulsion", "couple", "gapstats", "holder", "law")

REQUIRED = {
    "freeconv": ("N", "time"),
    "locallaw": ("N", "time", "samples"),
    "rigidity": ("N", "time", "samples"),
    "repulsion": ("N", "samples"),
    "couple": ("N", "time", "samples", "dt", "K"),
    "gapstats": ("N", "time", "samples"),
    "holder": ("N", "time", "samples", "dt", "K"),
    "law": ("N", "time", "samples", "dt"),
}

# kind-specific optional keys and their types
EXTRA_KEYS = {
    "ensemble": str,        # repulsion: goe | deformed
    "k0": int,              # couple / holder / gapstats: deformed index (default: centre of the bulk)
    "j0": int,              # GOE index (default N // 2)
    "offsets": list,        # holder: window centres relative to k0
    "sigmas": list,         # holder: explicit sigma values (default K^0.3, K^0.5, K^0.7)
    "tau_end": float,       # holder: micro-time length of each run
    "record_every": int,    # DBM snapshot stride
    "width": int,           # couple: label half-width of the gap-difference sup
    "eta_count": int,       # locallaw: number of eta values
    "energy_count": int,    # locallaw: number of energies
    "resamples": int,       # gapstats: permutation count
    "spacing": float,       # freeconv: grid spacing
}

_SCALARS = {"kind": str, "N": int, "t": float, "T": float, "profile": str, "ell": float, "G": float,
            "E0": float, "separation": float, "samples": int, "dt": float, "K": int, "omega_prime": float,
            "q": float, "eps_grid": list, "seed": int, "out": str}


@dataclass
class ExperimentConfig:
    kind: str
    N: int
    t: float | None = None
    T: float | None = None
    profile: str = "uniform"
    ell: float | None = None
    G: float | None = None
    E0: float | None = None
    separation: float | None = None
    samples: int | None = None
    dt: float | None = None
    K: int | None = None
    omega_prime: float | None = None
    q: float = 0.5
    eps_grid: list | None = None
    seed: int = 0
    out: str | None = None
    thresholds: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def form(self) -> str:
        return "T" if self.T is not None else "t"

    @property
    def time(self) -> float | None:
        return self.T if self.T is not None else self.t

    @property
    def omega(self) -> float:
        """``omega_prime``, defaulting to the value with ``K = N^(omega'/2)``."""
        if self.omega_prime is not None:
            return self.omega_prime
        return 2.0 * math.log(self.K) / math.log(self.N)

    def get(self, key: str, default=None):
        return self.extra.get(key, default)

    def threshold(self, name: str, default: float) -> float:
        return float(self.thresholds.get(name, default))

    def output_dir(self) -> Path:
        return Path(self.out if self.out else f"out/{self.kind}")

    def to_dict(self) -> dict:
        d = asdict(self)
        out = {k: v for k, v in d.items() if k not in ("thresholds", "extra", "out") and v is not None}
        out.update(self.extra)
        out.update({f"threshold_{k}": v for k, v in self.thresholds.items()})
        return out


def _line(marks: dict, key: str) -> str:
    return f"line {marks[key]}: " if key in marks else ""


def _coerce(key: str, value, kind, marks):
    if value is None:
        return None
    try:
        if kind is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if kind is str:
            return str(value)
        if kind is list:
            if not isinstance(value, list):
                raise TypeError
            return list(value)
    except (TypeError, ValueError):
        pass
    raise ConfigInvalid(key, f"{_line(marks, key)}{key} must be of type {kind.__name__}, got {value!r}")


def _key_lines(text: str) -> dict:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return {}
    if not isinstance(node, yaml.MappingNode):
        return {}
    return {k.value: k.start_mark.line + 1 for k, _ in node.value if isinstance(k, yaml.ScalarNode)}


def validate_config(text: str, kind: str | None = None) -> ExperimentConfig:
    """Parse and cross-check a config document.

    ``kind`` (from the command line) fills a missing ``kind`` key and must
    agree with it when both are present.
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark is not None else ""
        raise ConfigInvalid("<document>", f"{where}YAML parse error: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigInvalid("<document>", "config must be a flat key: value mapping")
    marks = _key_lines(text)
    values, thresholds, extra = {}, {}, {}
    for key, value in raw.items():
        key = str(key)
        if isinstance(value, dict):
            raise ConfigInvalid(key, f"{_line(marks, key)}nested mappings are not allowed ({key})")
        if key.startswith("threshold_"):
            thresholds[key[len("threshold_"):]] = _coerce(key, value, float, marks)
        elif key in _SCALARS:
            values[key] = _coerce(key, value, _SCALARS[key], marks)
        elif key in EXTRA_KEYS:
            extra[key] = _coerce(key, value, EXTRA_KEYS[key], marks)
        else:
            raise ConfigInvalid(key, f"{_line(marks, key)}unknown key {key!r}")

    if kind is not None:
        if "kind" in values and values["kind"] != kind:
            raise ConfigInvalid("kind", f"{_line(marks, 'kind')}config kind {values['kind']!r} does not match {kind!r}")
        values["kind"] = kind
    for key in ("kind", "N"):
        if key not in values:
            raise ConfigInvalid(key, f"missing required field {key!r}")
    kind = values["kind"]
    if kind not in KINDS:
        raise ConfigInvalid("kind", f"{_line(marks, 'kind')}unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    if "t" in values and "T" in values:
        raise ConfigInvalid("t", f"{_line(marks, 'T')}give either t or T, not both")
    cfg = ExperimentConfig(**values, thresholds=thresholds, extra=extra)

    for key in REQUIRED[kind]:
        if key == "time":
            if kind == "law" and cfg.T is not None:
                raise ConfigInvalid("t", f"{_line(marks, 'T')}kind law integrates the DBM and needs t, not T")
            if cfg.time is None:
                raise ConfigInvalid("t", f"missing required field 't' (or 'T') for kind {kind}")
        elif getattr(cfg, key) is None:
            raise ConfigInvalid(key, f"missing required field {key!r} for kind {kind}")
    if kind == "repulsion":
        ens = cfg.get("ensemble", "goe")
        if ens not in ("goe", "deformed"):
            raise ConfigInvalid("ensemble", f"{_line(marks, 'ensemble')}ensemble must be goe or deformed")
        if ens == "deformed" and cfg.time is None:
            raise ConfigInvalid("t", "missing required field 't' (or 'T') for the deformed ensemble")

    def positive(key, value, strict=True):
        if value is not None and not (value > 0 if strict else value >= 0):
            raise ConfigInvalid(key, f"{_line(marks, key)}{key} must be {'positive' if strict else 'non-negative'}, got {value}")

    for key in ("N", "samples", "dt", "K", "ell", "G", "separation", "omega_prime"):
        positive(key, getattr(cfg, key))
    positive("t", cfg.t, strict=kind != "freeconv")
    positive("T", cfg.T, strict=False)
    if not 0 < cfg.q < 1:
        raise ConfigInvalid("q", f"{_line(marks, 'q')}q must lie in (0, 1), got {cfg.q}")
    if not 0 <= cfg.seed < 2 ** 64:
        raise ConfigInvalid("seed", f"{_line(marks, 'seed')}seed must be an unsigned 64-bit integer")
    ell = cfg.ell if cfg.ell is not None else 1.0 / cfg.N
    if cfg.G is not None and cfg.G <= ell:
        raise ConfigInvalid("G", f"{_line(marks, 'G')}regularity separation requires G > ell (G={cfg.G}, ell={ell})")
    if cfg.eps_grid is not None:
        try:
            grid = [float(e) for e in cfg.eps_grid]
        except (TypeError, ValueError):
            raise ConfigInvalid("eps_grid", f"{_line(marks, 'eps_grid')}eps_grid must be a list of numbers") from None
        if len(grid) < 2 or min(grid) <= 0:
            raise ConfigInvalid("eps_grid", f"{_line(marks, 'eps_grid')}eps_grid needs at least two positive values")
        cfg.eps_grid = grid
    if cfg.K is not None and kind in ("couple", "holder") and 2 * cfg.K + 1 > cfg.N:
        raise ConfigInvalid("K", f"{_line(marks, 'K')}window 2K+1 = {2 * cfg.K + 1} exceeds N = {cfg.N}")
    return cfg


def load_config(path: str | Path, kind: str | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigInvalid("<file>", f"cannot read config {path}: {exc}") from None
    return validate_config(text, kind)
