"""SVG figures rebuilt from an experiment's CSV artifacts."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .io import read_csv


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "dbmlab"
    fig, ax = plt.subplots(figsize=(6, 4))
    return plt, fig, ax


def _save(plt, fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _ecdf(ax, values, label):
    v = np.sort(values)
    ax.step(v, np.arange(1, v.size + 1) / v.size, where="post", label=label)


def plot_freeconv(out: Path) -> list:
    _, d = read_csv(out / "density.csv")
    plt, fig, ax = _figure()
    ax.plot(d[:, 0], d[:, 3])
    ax.set_xlabel("E")
    ax.set_ylabel("rho_fc(E)")
    return [_save(plt, fig, out / "density.svg")]


def plot_locallaw(out: Path) -> list:
    _, d = read_csv(out / "locallaw.csv")
    plt, fig, ax = _figure()
    for e in np.unique(d[:, 0]):
        sel = d[:, 0] == e
        ax.loglog(d[sel, 1], d[sel, 2], marker="o", label=f"E={e:.3g}")
    ax.set_xlabel("eta")
    ax.set_ylabel("median |m_N - m_fc|")
    ax.legend(fontsize="small")
    return [_save(plt, fig, out / "locallaw.svg")]


def plot_rigidity(out: Path) -> list:
    _, d = read_csv(out / "rigidity.csv")
    plt, fig, ax = _figure()
    _ecdf(ax, d[:, 1], "max N|lambda - gamma|")
    _ecdf(ax, d[:, 2], "sup N|n_N - n_fc|")
    ax.set_xlabel("scaled error")
    ax.set_ylabel("CDF over samples")
    ax.legend()
    return [_save(plt, fig, out / "rigidity.svg")]


def plot_repulsion(out: Path) -> list:
    _, d = read_csv(out / "repulsion.csv")
    plt, fig, ax = _figure()
    eps = d[:, 0]
    ax.loglog(eps, np.where(d[:, 1] > 0, d[:, 1], np.nan), "o-", label="P[gap <= eps]")
    ax.loglog(eps, np.where(d[:, 2] > 0, d[:, 2], np.nan), "s-", label="P[N_I >= 2], fixed E")
    ref = d[-1, 1] * (eps / eps[-1]) ** 2
    ax.loglog(eps, ref, "k--", label="eps^2")
    ax.set_xlabel("eps")
    ax.legend()
    return [_save(plt, fig, out / "repulsion.svg")]


def plot_gapstats(out: Path) -> list:
    _, d = read_csv(out / "gaps.csv")
    plt, fig, ax = _figure()
    _ecdf(ax, d[:, 1], "deformed")
    _ecdf(ax, d[:, 2], "GOE")
    ax.set_xlabel("rescaled gap")
    ax.set_ylabel("CDF")
    ax.legend()
    return [_save(plt, fig, out / "gaps.svg")]


def plot_law(out: Path) -> list:
    _, a = read_csv(out / "sde_spectra.csv")
    _, b = read_csv(out / "direct_spectra.csv")
    plt, fig, ax = _figure()
    for data, label in ((a, "DBM"), (b, "direct")):
        n = int(data[:, 1].max()) + 1
        ev = data[:, 2].reshape(-1, n)
        mid = slice(n // 4, 3 * n // 4)
        _ecdf(ax, (n * np.diff(ev[:, mid], axis=1)).ravel(), label)
    ax.set_xlabel("N gap")
    ax.set_ylabel("CDF")
    ax.legend()
    return [_save(plt, fig, out / "law.svg")]


def plot_couple(out: Path) -> list:
    _, d = read_csv(out / "trajectory.csv")
    plt, fig, ax = _figure()
    times = np.unique(d[:, 0])
    u = (d[:, 2] - d[:, 3]).reshape(times.size, -1)
    ax.plot(times, u.max(axis=1) - u.min(axis=1))
    ax.set_xlabel("micro time")
    ax.set_ylabel("sup gap difference (path 0)")
    return [_save(plt, fig, out / "couple.svg")]


def plot_holder(out: Path) -> list:
    _, d = read_csv(out / "propagator.csv")
    labels = np.unique(d[:, 0])
    m = d[:, 2].reshape(labels.size, labels.size)
    row = m[int(np.searchsorted(labels, 0))]
    plt, fig, ax = _figure()
    dist = np.abs(labels)
    ds = np.arange(1, int(dist.max()) + 1)
    env = np.array([np.abs(row[dist == k]).max() for k in ds])
    ax.loglog(ds + 1, np.where(env > 0, env, np.nan), "o", label="max |U_0p|")
    ax.loglog(ds + 1, env[0] * 2.0 / (ds + 1), "k--", label="1/(d+1)")
    ax.set_xlabel("|p| + 1")
    ax.legend()
    return [_save(plt, fig, out / "propagator_decay.svg")]


PLOTTERS = {"freeconv": plot_freeconv, "locallaw": plot_locallaw, "rigidity": plot_rigidity,
            "repulsion": plot_repulsion, "gapstats": plot_gapstats, "law": plot_law, "couple": plot_couple,
            "holder": plot_holder}


def make_plots(kind: str, out: str | Path) -> list:
    return PLOTTERS[kind](Path(out))
