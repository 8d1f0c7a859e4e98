"""CSV and JSON persistence.

CSV files use ``,`` separators, a header row and LF line endings; floats are
written in shortest round-trip form so re-reading reproduces every bit.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path: str | Path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(x) for x in row] for row in r]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def write_density(path, fc) -> Path:
    """``E,re_m,im_m,rho`` on the solver grid."""
    m = fc.m_values
    return write_csv(path, ["E", "re_m", "im_m", "rho"],
                     zip(fc.grid, m.real, m.imag, fc.density))


def write_gamma(path, gamma) -> Path:
    return write_csv(path, ["i", "gamma"], enumerate(np.asarray(gamma)))


def write_spectra(path, spectra, start: int = 0) -> Path:
    """``sample_index,i,lambda`` in long format."""
    ev = np.atleast_2d(spectra)

    def rows():
        for k, row in enumerate(ev):
            for i, lam in enumerate(row):
                yield start + k, i, lam

    return write_csv(path, ["sample_index", "i", "lambda"], rows())


def write_trajectory(path, times, labels, x, y) -> Path:
    """``time,j,x,y`` for window labels ``j``."""

    def rows():
        for m, tm in enumerate(times):
            for c, j in enumerate(labels):
                yield tm, j, x[m, c], y[m, c]

    return write_csv(path, ["time", "j", "x", "y"], rows())


def write_matrix(path, labels, matrix) -> Path:
    """Propagator entries ``a,p,value``."""
    labels = np.asarray(labels)

    def rows():
        for r, a in enumerate(labels):
            for c, p in enumerate(labels):
                yield a, p, matrix[r, c]

    return write_csv(path, ["a", "p", "value"], rows())


def jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats to plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return obj


def dumps_report(report: dict) -> str:
    return json.dumps(jsonable(report), sort_keys=True, indent=2) + "\n"


def write_report(path, report: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_report(report))
    return path
