"""Exit criteria, each run at its stated tolerance and scale.

Every test prints (and records for the session summary) exactly one line
``PASS criterion <n>: ...`` or ``FAIL criterion <n>: ...``.
"""

from __future__ import annotations

import math
from importlib import resources

import mpmath
import numpy as np
import pytest

from dbmlab import dbm, freeconv as fcv
from dbmlab.config import validate_config
from dbmlab.parabolic import ParabolicKernel, decay_envelope, propagator
from dbmlab.profiles import rough, two_atom, uniform, zeros
from dbmlab.rng import RngStream
from dbmlab.runner import _matched_start, _law, build_profile, run

pytestmark = pytest.mark.acceptance


def _preset(name: str, out, **overrides):
    text = resources.files("dbmlab").joinpath("presets", f"{name}.yaml").read_text()
    extra = "".join(f"{k}: {v}\n" for k, v in overrides.items())
    return validate_config(f"{text}\n{extra}out: {out}\n")


def _verdict(log, n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line)
    log.append(line)
    assert ok, line


def _check(report, name):
    c = report.checks[name]
    return c["pass"], f"{name}={c['value']:.6g} (threshold {c['threshold']})"


def test_c01_semicircle_closed_form(criterion_log):
    z = np.linspace(-1.8, 1.8, 100) + 1e-3j
    m = fcv.solve_mfc(zeros(10), 1.0, z, form="T")
    ref = []
    for w in z:
        zz = mpmath.mpc(w.real, w.imag)
        r = mpmath.sqrt(zz * zz - 4)
        cand = (-zz + r) / 2
        ref.append(complex(cand if mpmath.im(cand) > 0 else (-zz - r) / 2))
    err = float(np.max(np.abs(m - np.array(ref))))
    _verdict(criterion_log, 1, err <= 1e-10, f"max |m - m_sc| = {err:.3g} (tolerance 1e-10)")


def test_c02_time_zero_identity(criterion_log):
    profiles = [uniform(50), two_atom(40), zeros(7), rough(60, 1 / 60)]
    rng = np.random.default_rng(2)
    worst = 0.0
    for prof in profiles:
        z = rng.uniform(-3, 3, 25) + 1j * np.geomspace(1e-3, 10, 25)
        for form in ("t", "T"):
            m = fcv.solve_mfc(prof, 0.0, z, form=form)
            worst = max(worst, float(np.max(np.abs(m - fcv.stieltjes_V(prof, z)))))
    _verdict(criterion_log, 2, worst <= 1e-12, f"max |m_fc - m_V| at t=0 = {worst:.3g} (tolerance 1e-12)")


def test_c03_law_equivalence(criterion_log, tmp_path):
    cfg = _preset("law", tmp_path)
    assert cfg.dt == pytest.approx(1e-2 * cfg.t) and cfg.N == 200 and cfg.samples == 200
    ok, detail = _check(run(cfg).report, "ks")
    _verdict(criterion_log, 3, ok, f"bulk-gap KS, DBM vs direct: {detail}")


def test_c04_rigidity(criterion_log, tmp_path):
    rep = run(_preset("rigidity", tmp_path)).report
    ok, detail = _check(rep, "rigidity")
    _verdict(criterion_log, 4, ok, f"median max bulk N|lambda-gamma|: {detail}")


def test_c05_local_law(criterion_log, tmp_path):
    rep = run(_preset("locallaw", tmp_path)).report
    ok1, d1 = _check(rep, "scaled_error")
    ok2, d2 = _check(rep, "slope")
    _verdict(criterion_log, 5, ok1 and ok2, f"sup N eta |dm|: {d1}; {d2}")


def test_c06_level_repulsion(criterion_log, tmp_path):
    goe = run(_preset("repulsion_goe", tmp_path / "goe")).report
    de = run(_preset("repulsion_deformed", tmp_path / "def")).report
    assert de.config["t"] == pytest.approx(20 * de.config["ell"])
    ok1, d1 = _check(goe, "exponent")
    ok2, d2 = _check(de, "exponent")
    _verdict(criterion_log, 6, ok1 and ok2, f"GOE {d1}; deformed {d2}")


def test_c07_gap_universality(criterion_log, tmp_path):
    rep = run(_preset("gapstats", tmp_path)).report
    ok1, d1 = _check(rep, "ks")
    ok2, _ = _check(rep, "null_band")
    band = rep.metrics["null_band"]
    _verdict(criterion_log, 7, ok1 and ok2, f"{d1}; null band {band:.4g} (KS must be <= 2x band)")


def test_c08_coupling_contraction(criterion_log, tmp_path):
    rep = run(_preset("couple", tmp_path)).report
    ok, detail = _check(rep, "contraction")
    m = rep.metrics
    _verdict(criterion_log, 8, ok, f"median start {m['median_start']:.4g} / window {m['median_window']:.4g}: {detail}")


def test_c09_propagator(criterion_log):
    cfg = validate_config("kind: holder\nN: 500\nt: 0.2\nprofile: uniform\nsamples: 1\ndt: 2.0e-5\nK: 64\nseed: 10\n")
    profile = build_profile(cfg)
    fc = _law(cfg, profile)
    k0, j0 = int(np.argmin(np.abs(fc.classical_locations - profile.center))), cfg.N // 2
    x0, y0, _ = _matched_start(cfg, profile, fc, k0, j0, 0)
    span = 64 ** 0.1
    traj = dbm.integrate_coupled(x0, y0, k0, j0, 2.0 * span / cfg.N, cfg.dt, RngStream(cfg.seed, 99),
                                 dbm.DriftOpts(record_every=10), t0=cfg.time)
    kernel = ParabolicKernel.from_coupled(traj, 64)
    s0 = float(kernel.times[0])
    U = propagator(kernel, s0, s0 + span)
    row = U.row_sum_error()
    linf = float(np.abs(U.matrix).sum(axis=1).max())
    ident = float(np.abs(propagator(kernel, s0 + 0.5, s0 + 0.5).matrix - np.eye(kernel.size)).max())
    slope = decay_envelope(U).exponent
    ok = row <= 1e-10 and linf <= 1 + 1e-10 and ident == 0.0 and slope <= -0.8
    _verdict(criterion_log, 9, ok, f"row-sum err {row:.3g}, l_inf norm {linf:.15g}, identity err {ident:.3g}, "
                                   f"decay exponent {slope:.4g} (<= -0.8)")


def test_c10_holder(criterion_log, tmp_path):
    rep = run(_preset("holder", tmp_path)).report
    ok, detail = _check(rep, "holder_exponent")
    _verdict(criterion_log, 10, ok, f"median fitted exponent over {rep.metrics['kernels']} kernels: {detail}")


def test_c11_determinism(criterion_log, tmp_path):
    same = []
    for name, extra in (("rigidity", {}), ("repulsion_goe", {"samples": 2000, "threshold_min_observations": 1000}),
                        ("freeconv_semicircle", {})):
        a = run(_preset(name, tmp_path / f"{name}_a", **extra))
        b = run(_preset(name, tmp_path / f"{name}_b", **extra))
        same.append((a.out_dir / "report.json").read_bytes() == (b.out_dir / "report.json").read_bytes())
    _verdict(criterion_log, 11, all(same), f"byte-identical report.json on rerun: {sum(same)}/{len(same)} experiments")
