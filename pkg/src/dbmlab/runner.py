"""Experiment orchestration: one function per config kind.

Every kind returns metrics and a set of named checks; the report passes when
all checks pass.  Random streams are keyed by ``(seed, sample_index)`` and the
report carries no timestamps, so a rerun with the same config and seed
reproduces the JSON byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dbm, io, stats
from .config import ExperimentConfig
from .ensembles import sample_deformed, sample_goe_spectrum, sample_many
from .errors import ConfigInvalid, DBMLabError, ExperimentFailed
from .freeconv import SemicircleLaw, check_regularity, matching_params, solve_mfc_grid
from .parabolic import ParabolicKernel, decay_envelope, holder_check, propagator
from .profiles import PRESETS, from_preset, load_profile
from .rng import RngStream

# tags for independent sub-streams of one master seed
_GOE_TAG = 1
_PATH_TAG = 2
_VEC_TAG = 3


@dataclass
class RunResult:
    report: stats.ExperimentReport
    out_dir: Path
    artifacts: list

    @property
    def passed(self) -> bool:
        return self.report.passed


def sub_seed(seed: int, tag: int) -> int:
    return RngStream(seed, 0).child(tag).master_seed


def build_profile(cfg: ExperimentConfig):
    kwargs = {}
    if cfg.ell is not None:
        kwargs["ell"] = cfg.ell
    if cfg.G is not None:
        kwargs["window"] = cfg.G
    if cfg.E0 is not None:
        kwargs["center"] = cfg.E0
    if cfg.profile.startswith("file:"):
        return load_profile(cfg.profile[len("file:"):], **kwargs)
    if cfg.profile not in PRESETS:
        raise ConfigInvalid("profile", f"unknown profile {cfg.profile!r}; expected one of {sorted(PRESETS)} or file:<path>")
    if cfg.separation is not None:
        if cfg.profile != "two_atom":
            raise ConfigInvalid("separation", "separation only applies to the two_atom profile")
        kwargs["separation"] = cfg.separation
    if cfg.profile == "rough":
        kwargs.setdefault("ell", 1.0 / cfg.N)
        return from_preset("rough", cfg.N, **kwargs)
    return from_preset(cfg.profile, cfg.N, **kwargs)


def _law(cfg, profile):
    spacing = cfg.get("spacing", 1e-3)
    from .freeconv import default_grid

    grid = default_grid(profile, cfg.time, form=cfg.form, spacing=spacing)
    return solve_mfc_grid(profile, cfg.time, grid, form=cfg.form)


def _check(value, threshold, passed) -> dict:
    return {"value": value, "threshold": threshold, "pass": bool(passed)}


def _deformed_spectra(cfg, profile, count=None, seed=None):
    count = cfg.samples if count is None else count
    seed = cfg.seed if seed is None else seed
    return stats.as_spectra(sample_many(profile, cfg.time, seed, count, form=cfg.form))


def _goe_spectra(cfg, count=None):
    count = cfg.samples if count is None else count
    return stats.as_spectra(sample_many(None, 0.0, sub_seed(cfg.seed, _GOE_TAG), count, n=cfg.N))


def _bulk_centre(law, q):
    bulk = stats.bulk_index_set(law, q)
    if len(bulk) == 0:
        raise ConfigInvalid("q", "the bulk index set is empty")
    return int(bulk.indices[len(bulk) // 2])


# ------------------------------------------------------------------ kinds


def run_freeconv(cfg, out):
    profile = build_profile(cfg)
    fc = _law(cfg, profile)
    arts = [io.write_density(out / "density.csv", fc), io.write_gamma(out / "gamma.csv", fc.classical_locations)]
    e0 = profile.center
    reg = check_regularity(profile, cfg.q)
    metrics = {"mass": fc.mass, "rho_E0": float(fc.density_at(e0)), "E0": e0, "eta_floor": fc.eta_floor,
               "grid_points": int(fc.grid.size), "regularity": reg.to_dict()}
    tol = cfg.threshold("mass_error", 1e-3)
    checks = {"mass": _check(abs(fc.mass - 1.0), tol, abs(fc.mass - 1.0) <= tol)}
    if "rho_E0" in cfg.thresholds:
        expected = cfg.thresholds["rho_E0"]
        tol_rho = cfg.threshold("rho_E0_error", 1e-4)
        err = abs(metrics["rho_E0"] - expected)
        checks["rho_E0"] = _check(err, tol_rho, err <= tol_rho)
    return metrics, checks, arts


def run_locallaw(cfg, out):
    profile = build_profile(cfg)
    fc = _law(cfg, profile)
    ev = _deformed_spectra(cfg, profile)
    lo, hi = fc.window(cfg.q)
    energies = np.linspace(lo, hi, cfg.get("energy_count", 5) + 2)[1:-1]
    etas = np.geomspace(10.0 / cfg.N, 1.0, cfg.get("eta_count", 8))
    lo_s, hi_s = cfg.threshold("slope_min", -1.3), cfg.threshold("slope_max", -0.7)
    rep = stats.local_law_check(fc, ev, energies, etas, threshold=cfg.threshold("scaled_error", stats.polylog_threshold(cfg.N)),
                                slope_window=(lo_s, hi_s))
    arts = [io.write_csv(out / "locallaw.csv", ["E", "eta", "median_abs_err", "max_scaled_err"],
                         ([r["E"], r["eta"], r["median_abs_err"], r["max_scaled_err"]] for r in rep.table)),
            io.write_spectra(out / "spectra.csv", ev)]
    metrics = {"sup_scaled_error": rep.sup_scaled_error, "slope": rep.slope, "energies": energies, "etas": etas}
    checks = {"scaled_error": _check(rep.sup_scaled_error, rep.threshold, rep.sup_scaled_error <= rep.threshold),
              "slope": _check(rep.slope, [lo_s, hi_s], lo_s <= rep.slope <= hi_s)}
    return metrics, checks, arts


def run_rigidity(cfg, out):
    profile = build_profile(cfg)
    fc = _law(cfg, profile)
    ev = _deformed_spectra(cfg, profile)
    thr = cfg.threshold("rigidity", stats.polylog_threshold(cfg.N))
    rig = stats.rigidity_check(fc, ev, cfg.q, threshold=thr)
    cnt = stats.counting_error(ev, fc, cfg.q, threshold=cfg.threshold("counting", thr))
    arts = [io.write_csv(out / "rigidity.csv", ["sample_index", "max_scaled_error", "counting_sup"],
                         zip(range(ev.shape[0]), rig.per_sample_max, cnt.per_sample_sup)),
            io.write_gamma(out / "gamma.csv", fc.classical_locations),
            io.write_spectra(out / "spectra.csv", ev)]
    metrics = {"median_max_error": rig.median, "center_median": rig.center_median,
               "boundary_median": rig.boundary_median, "per_sample": stats.summarize(rig.per_sample_max),
               "counting_median": cnt.median, "bulk_size": int(rig.scaled_errors.shape[1])}
    checks = {"rigidity": _check(rig.median, rig.threshold, rig.passes),
              "counting": _check(cnt.median, cnt.threshold, cnt.passes)}
    return metrics, checks, arts


def run_repulsion(cfg, out):
    ensemble = cfg.get("ensemble", "goe")
    if ensemble == "goe":
        law = SemicircleLaw(cfg.N)
        ev = _goe_spectra(cfg)
    else:
        profile = build_profile(cfg)
        law = _law(cfg, profile)
        ev = _deformed_spectra(cfg, profile)
    bulk = stats.bulk_index_set(law, cfg.q)
    lo, hi = cfg.threshold("exponent_min", 1.7), cfg.threshold("exponent_max", 2.3)
    grid = np.geomspace(0.05, 0.5, 10) if cfg.eps_grid is None else np.asarray(cfg.eps_grid)
    fit = stats.level_repulsion_fit(ev, bulk, grid, window=(lo, hi),
                                    min_observations=int(cfg.threshold("min_observations", 10_000)))
    rows = fit.table()
    arts = [io.write_csv(out / "repulsion.csv", ["eps", "p_gap", "p_two_fixed_E", "p_two_centered"],
                         ([r["eps"], r["p_gap"], r["p_two_fixed_E"], r["p_two_centered"]] for r in rows))]
    metrics = {"ensemble": ensemble, "exponent": fit.exponent, "observations": fit.observations,
               "k2_fixed_energy_exponent": fit.k2_energy_exponent, "k2_reference_slope": fit.reference_k2_slope,
               "bulk_size": len(bulk)}
    checks = {"exponent": _check(fit.exponent, [lo, hi], fit.passes)}
    return metrics, checks, arts


def run_gapstats(cfg, out):
    profile = build_profile(cfg)
    fc = _law(cfg, profile)
    goe = SemicircleLaw(cfg.N)
    k0 = cfg.get("k0", _bulk_centre(fc, cfg.q))
    j0 = cfg.get("j0", cfg.N // 2)
    ev = _deformed_spectra(cfg, profile)
    ev_goe = _goe_spectra(cfg)
    thr = cfg.threshold("ks", 0.1)
    band_factor = cfg.threshold("band_factor", 2.0)
    res = stats.gap_universality_distance(ev, ev_goe, k0, j0, fc, goe, q=cfg.q, resamples=cfg.get("resamples", 500),
                                          seed=sub_seed(cfg.seed, _VEC_TAG), threshold=thr,
                                          min_samples=int(cfg.threshold("min_samples", 200)))
    res = stats.GapUniversality(res.ks, res.null_band, res.deformed_gaps, res.goe_gaps, thr, band_factor)
    e = float(fc.classical_locations[k0])
    lo, hi = fc.window(cfg.q)
    b = min(0.25 * (hi - lo), 20.0 / cfg.N)
    corr = {}
    for n_pts in (1, 2):
        c = stats.averaged_correlation_compare(ev, ev_goe, e, b, n_pts, fc, goe, E_goe=0.0, q=cfg.q,
                                               seed=sub_seed(cfg.seed, _VEC_TAG))
        corr[f"n{n_pts}"] = {"deformed": c.deformed, "goe": c.goe, "difference": c.difference,
                             "bootstrap_sigma": c.bootstrap_sigma}
    arts = [io.write_csv(out / "gaps.csv", ["sample_index", "deformed_gap", "goe_gap"],
                         zip(range(res.deformed_gaps.size), res.deformed_gaps, res.goe_gaps))]
    metrics = {"ks": res.ks, "null_band": res.null_band, "k0": k0, "j0": j0,
               "deformed_mean_gap": float(res.deformed_gaps.mean()), "goe_mean_gap": float(res.goe_gaps.mean()),
               "averaged_correlations": corr, "correlation_window": [e - b, e + b]}
    checks = {"ks": _check(res.ks, thr, res.ks <= thr),
              "null_band": _check(res.ks, band_factor * res.null_band, res.ks <= band_factor * res.null_band)}
    return metrics, checks, arts


def run_law(cfg, out):
    profile = build_profile(cfg)
    fc = _law(cfg, profile)
    bulk = stats.bulk_index_set(fc, cfg.q)
    idx = bulk.indices[:-1]
    opts = dbm.DriftOpts(record=False)
    path_seed = sub_seed(cfg.seed, _PATH_TAG)
    sde = np.empty((cfg.samples, cfg.N))
    floor = 0
    for k in range(cfg.samples):
        traj = dbm.integrate_dbm(profile.entries, cfg.t, cfg.dt, RngStream(path_seed, k), opts)
        sde[k] = traj.final
        floor += traj.stats.floor_steps
    direct = _deformed_spectra(cfg, profile)
    g_sde = (cfg.N * (sde[:, idx + 1] - sde[:, idx])).ravel()
    g_dir = (cfg.N * (direct[:, idx + 1] - direct[:, idx])).ravel()
    ks = stats.ks_distance(g_sde, g_dir)
    thr = cfg.threshold("ks", 0.05)
    arts = [io.write_spectra(out / "sde_spectra.csv", sde), io.write_spectra(out / "direct_spectra.csv", direct)]
    metrics = {"ks": ks, "observations": int(g_sde.size), "floor_steps": floor,
               "mean_gap_sde": float(g_sde.mean()), "mean_gap_direct": float(g_dir.mean())}
    return metrics, {"ks": _check(ks, thr, ks <= thr)}, arts


def _matched_start(cfg, profile, fc, k0, j0, index):
    mp = matching_params(fc, k0, j0, cfg.N, q=cfg.q)
    x0 = sample_deformed(profile, cfg.time, RngStream(cfg.seed, index), form=cfg.form).eigenvalues
    y0 = sample_goe_spectrum(cfg.N, RngStream(sub_seed(cfg.seed, _GOE_TAG), index), a=mp.a, b=mp.b).eigenvalues
    return x0, y0, mp


def theorem_window(n: int, omega: float) -> tuple[float, float]:
    """Micro-time window ``[N^(w/10) - N^(w/30), N^(w/10)]``."""
    hi = n ** (omega / 10.0)
    return hi - n ** (omega / 30.0), hi


def run_couple(cfg, out):
    profile = build_profile(cfg)
    fc = _law(cfg, profile)
    k0 = cfg.get("k0", _bulk_centre(fc, cfg.q))
    j0 = cfg.get("j0", cfg.N // 2)
    width = cfg.get("width", 5)
    lo, hi = theorem_window(cfg.N, cfg.omega)
    opts = dbm.DriftOpts(record_every=cfg.get("record_every", 1))
    path_seed = sub_seed(cfg.seed, _PATH_TAG)
    start_gap, window_gap, rows = [], [], []
    extra = {}
    for k in range(cfg.samples):
        x0, y0, mp = _matched_start(cfg, profile, fc, k0, j0, k)
        traj = dbm.integrate_coupled(x0, y0, k0, j0, hi / cfg.N, cfg.dt, RngStream(path_seed, k), opts, t0=cfg.time)
        g = dbm.gap_difference_sup(traj, width)
        tau = traj.micro_times - traj.micro_times[0]
        inside = (tau >= lo - 1e-9) & (tau <= hi + 1e-9)
        start_gap.append(float(g[0]))
        window_gap.append(float(g[inside].max()))
        rows.append((k, g[0], g[inside].max()))
        if k == 0:
            labels = np.arange(-width, width + 1)
            arts0 = io.write_trajectory(out / "trajectory.csv", tau, labels, traj.micro("x", labels),
                                        traj.micro("y", labels))
            extra = {"matching": mp.to_dict(), "path_rigidity_fraction": dbm.path_rigidity_fraction(traj)}
    med0, med1 = float(np.median(start_gap)), float(np.median(window_gap))
    ratio = med0 / med1 if med1 > 0 else math.inf
    need = cfg.threshold("contraction", 3.0)
    arts = [arts0, io.write_csv(out / "couple.csv", ["path", "start_gap_diff", "window_gap_diff"], rows)]
    metrics = {"k0": k0, "j0": j0, "omega_prime": cfg.omega, "tau_window": [lo, hi], "median_start": med0,
               "median_window": med1, "contraction": ratio, "start": stats.summarize(start_gap),
               "window": stats.summarize(window_gap), **extra}
    return metrics, {"contraction": _check(ratio, need, ratio >= need)}, arts


def run_holder(cfg, out):
    profile = build_profile(cfg)
    fc = _law(cfg, profile)
    K = cfg.K
    k0 = cfg.get("k0", _bulk_centre(fc, cfg.q))
    j0 = cfg.get("j0", cfg.N // 2)
    spread = cfg.N // 5
    offsets = [int(o) for o in cfg.get("offsets", [-spread, 0, spread])]
    sigmas = np.asarray(cfg.get("sigmas", [K ** 0.3, K ** 0.5, K ** 0.7]), dtype=float)
    tau_end = float(cfg.get("tau_end", math.ceil(sigmas.max()) + 1.0))
    opts = dbm.DriftOpts(record_every=cfg.get("record_every", 10))
    thr = cfg.threshold("holder_exponent", 0.05)
    path_seed = sub_seed(cfg.seed, _PATH_TAG)
    vec_seed = sub_seed(cfg.seed, _VEC_TAG)
    exponents, rows, arts = [], [], []
    prop_metrics = {}
    runs = math.ceil(cfg.samples / len(offsets))
    for r in range(runs):
        x0, y0, _ = _matched_start(cfg, profile, fc, k0, j0, r)
        traj = dbm.integrate_coupled(x0, y0, k0, j0, tau_end / cfg.N, cfg.dt, RngStream(path_seed, r), opts,
                                     t0=cfg.time)
        for off in offsets:
            idx = len(exponents)
            if idx >= cfg.samples:
                break
            kernel = ParabolicKernel.from_coupled(traj, K, offset=off)
            kernel = ParabolicKernel(kernel.times - kernel.times[0], kernel.a, kernel.b, kernel.labels, kernel.epsilon)
            v0 = RngStream(vec_seed, idx).generator().choice([-1.0, 1.0], kernel.size)
            res = holder_check(kernel, v0, sigmas, threshold=thr)
            exponents.append(res.exponent)
            rows.append((idx, r, off, res.exponent, *res.ratios))
            if idx == 0:
                prop_metrics = _propagator_metrics(kernel)
                U = propagator(kernel, 0.0, K ** 0.1)
                arts.append(io.write_matrix(out / "propagator.csv", kernel.labels, U.matrix))
    med = float(np.median(exponents))
    arts.append(io.write_csv(out / "holder.csv", ["kernel", "run", "offset", "exponent",
                                                   *[f"ratio_{k}" for k in range(sigmas.size)]], rows))
    metrics = {"median_exponent": med, "exponents": stats.summarize(exponents), "sigmas": sigmas,
               "kernels": len(exponents), "runs": runs, "offsets": offsets, "propagator": prop_metrics}
    return metrics, {"holder_exponent": _check(med, thr, med > thr)}, arts


def _propagator_metrics(kernel) -> dict:
    U = propagator(kernel, 0.0, kernel.K ** 0.1)
    ident = propagator(kernel, 1.0, 1.0)
    return {"row_sum_error": U.row_sum_error(), "min_entry": U.min_entry(),
            "linf_norm": float(np.abs(U.matrix).sum(axis=1).max()),
            "identity_error": float(np.abs(ident.matrix - np.eye(kernel.size)).max()),
            "decay_exponent": decay_envelope(U).exponent}


RUNNERS = {"freeconv": run_freeconv, "locallaw": run_locallaw, "rigidity": run_rigidity, "repulsion": run_repulsion,
           "gapstats": run_gapstats, "law": run_law, "couple": run_couple, "holder": run_holder}


def run(cfg: ExperimentConfig, *, plots: bool = False) -> RunResult:
    """Execute ``cfg`` and write its artifacts and ``report.json`` into the output directory."""
    out = cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    try:
        metrics, checks, arts = RUNNERS[cfg.kind](cfg, out)
    except ConfigInvalid:
        raise
    except DBMLabError as exc:
        raise ExperimentFailed(cfg.kind, exc) from exc
    passed = all(c["pass"] for c in checks.values())
    report = stats.ExperimentReport(cfg.kind, cfg.to_dict(), cfg.seed, metrics, passed, checks)
    report_path = io.write_report(out / "report.json", report.to_dict())
    arts = [*arts, report_path]
    if plots:
        from .plots import make_plots

        arts += make_plots(cfg.kind, out)
    return RunResult(report, out, [str(Path(a).relative_to(out)) for a in arts])
