from __future__ import annotations

import csv
import json

import pytest

from dbmlab import cli
from dbmlab.config import validate_config
from dbmlab.runner import run


def _write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_freeconv_density_at_zero(tmp_path):
    cfg = validate_config(f"kind: freeconv\nN: 100\nT: 1.0\nprofile: zero\nout: {tmp_path / 'fc'}\n")
    res = run(cfg)
    with open(res.out_dir / "density.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["E", "re_m", "im_m", "rho"]
    zero = [r for r in rows if abs(float(r["E"])) < 1e-12]
    assert len(zero) == 1
    assert float(zero[0]["rho"]) == pytest.approx(0.31831, abs=1e-4)
    raw = (res.out_dir / "density.csv").read_bytes()
    assert b"\r\n" not in raw


def _small_rigidity(tmp_path, name, seed=3):
    return validate_config(f"kind: rigidity\nN: 60\nt: 0.3\nsamples: 8\nseed: {seed}\nout: {tmp_path / name}\n")


def test_reports_are_byte_identical_on_rerun(tmp_path):
    a = run(_small_rigidity(tmp_path, "a"))
    b = run(_small_rigidity(tmp_path, "b"))
    assert (a.out_dir / "report.json").read_bytes() == (b.out_dir / "report.json").read_bytes()
    assert (a.out_dir / "spectra.csv").read_bytes() == (b.out_dir / "spectra.csv").read_bytes()
    c = run(_small_rigidity(tmp_path, "c", seed=4))
    assert (a.out_dir / "report.json").read_bytes() != (c.out_dir / "report.json").read_bytes()


def test_report_embeds_config_and_seed(tmp_path):
    res = run(_small_rigidity(tmp_path, "r"))
    report = json.loads((res.out_dir / "report.json").read_text())
    assert report["schema_version"] == 1
    assert report["seed"] == 3 and report["config"]["N"] == 60
    assert set(report) >= {"schema_version", "config", "seed", "metrics", "pass"}
    # rerunning from the embedded config reproduces the numbers
    text = "\n".join(f"{k}: {json.dumps(v)}" for k, v in report["config"].items())
    again = run(validate_config(text + f"\nout: {tmp_path / 'again'}\n"))
    assert json.loads((again.out_dir / "report.json").read_text()) == report


def test_writes_stay_inside_output_dir(tmp_path):
    out = tmp_path / "only"
    run(validate_config(f"kind: repulsion\nN: 20\nsamples: 60\nthreshold_min_observations: 100\nout: {out}\n"), plots=True)
    assert [p.name for p in tmp_path.iterdir()] == ["only"]
    assert (out / "repulsion.svg").exists()


def test_cli_exit_codes(tmp_path, capsys):
    good = _write(tmp_path, "N: 100\nT: 1.0\nprofile: zero\nthreshold_rho_E0: 0.3183098861837907\n", "good.yaml")
    assert cli.main(["freeconv", "--config", str(good), "--out", str(tmp_path / "o1")]) == 0
    strict = _write(tmp_path, "N: 60\nt: 0.3\nsamples: 4\nthreshold_rigidity: 1.0e-6\n", "strict.yaml")
    assert cli.main(["rigidity", "--config", str(strict), "--out", str(tmp_path / "o2"), "--seed", "5"]) == 1
    bad = _write(tmp_path, "t: 0.3\nsamples: 4\n", "bad.yaml")
    assert cli.main(["rigidity", "--config", str(bad), "--out", str(tmp_path / "o3")]) == 2
    assert cli.main(["rigidity", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert cli.main(["nonsense", "--config", str(good)]) == 2
    err = capsys.readouterr().err
    assert "N" in err


def test_cli_seed_override(tmp_path):
    cfg = _write(tmp_path, "N: 40\nt: 0.3\nsamples: 4\nseed: 1\n")
    cli.main(["rigidity", "--config", str(cfg), "--out", str(tmp_path / "s"), "--seed", "99"])
    report = json.loads((tmp_path / "s" / "report.json").read_text())
    assert report["seed"] == 99


@pytest.mark.parametrize("kind, text", [
    ("locallaw", "N: 60\nt: 0.3\nsamples: 4\neta_count: 3\nenergy_count: 2\n"),
    ("gapstats", "N: 60\nt: 0.3\nsamples: 20\nresamples: 20\nthreshold_min_samples: 10\n"),
    ("law", "N: 20\nt: 0.02\ndt: 0.002\nsamples: 4\n"),
    ("couple", "N: 60\nt: 0.2\nsamples: 2\ndt: 0.0005\nK: 8\n"),
    ("holder", "N: 60\nt: 0.2\nsamples: 2\ndt: 0.0005\nK: 6\noffsets: [0, 10]\nrecord_every: 2\n"),
])
def test_every_kind_runs_with_plots(tmp_path, kind, text):
    cfg = validate_config(f"kind: {kind}\n{text}out: {tmp_path / kind}\n")
    res = run(cfg, plots=True)
    assert (res.out_dir / "report.json").exists()
    assert any(a.endswith(".svg") for a in res.artifacts)
