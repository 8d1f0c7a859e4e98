from __future__ import annotations

from importlib import resources

import pytest

from dbmlab.config import KINDS, validate_config
from dbmlab.errors import ConfigInvalid


def test_missing_N_names_the_field():
    with pytest.raises(ConfigInvalid) as err:
        validate_config("kind: rigidity\nt: 0.1\nsamples: 3\n")
    assert err.value.field == "N"


def test_G_not_above_ell_cites_regularity_separation():
    with pytest.raises(ConfigInvalid) as err:
        validate_config("kind: rigidity\nN: 100\nt: 0.1\nsamples: 3\nell: 0.2\nG: 0.1\n")
    assert err.value.field == "G"
    assert "regularity separation" in str(err.value)
    assert "line 6" in str(err.value)


@pytest.mark.parametrize("text, field", [
    ("kind: rigidity\nN: 100\nt: 0.1\nsamples: -3\n", "samples"),
    ("kind: rigidity\nN: 100\nT: 0.1\nt: 0.1\nsamples: 3\n", "t"),
    ("kind: nope\nN: 10\n", "kind"),
    ("kind: rigidity\nN: 10\nt: 0.1\nsamples: 3\nbogus: 1\n", "bogus"),
    ("kind: rigidity\nN: 10.5\nt: 0.1\nsamples: 3\n", "N"),
    ("kind: rigidity\nN: 10\nt: 0.1\nsamples: 3\nq: 1.5\n", "q"),
    ("kind: couple\nN: 10\nt: 0.1\nsamples: 3\ndt: 0.01\nK: 8\n", "K"),
    ("kind: repulsion\nN: 10\nsamples: 3\nensemble: deformed\n", "t"),
    ("kind: law\nN: 10\nT: 0.1\nsamples: 3\ndt: 0.01\n", "t"),
    ("kind: repulsion\nN: 10\nsamples: 3\neps_grid: [0.1]\n", "eps_grid"),
    ("kind: rigidity\nN: 10\nt: 0.1\nsamples: 3\nnested: {a: 1}\n", "nested"),
    ("[1, 2]", "<document>"),
    ("kind: [unclosed\n", "<document>"),
])
def test_invalid_configs(text, field):
    with pytest.raises(ConfigInvalid) as err:
        validate_config(text)
    assert err.value.field == field


def test_cli_kind_fills_and_must_agree():
    cfg = validate_config("N: 10\nt: 0.1\nsamples: 2\n", kind="rigidity")
    assert cfg.kind == "rigidity"
    with pytest.raises(ConfigInvalid):
        validate_config("kind: locallaw\nN: 10\nt: 0.1\nsamples: 2\n", kind="rigidity")


def test_thresholds_and_extras():
    cfg = validate_config("kind: couple\nN: 500\nt: 0.2\nsamples: 2\ndt: 1.0e-5\nK: 32\nthreshold_contraction: 2\nwidth: 4\n")
    assert cfg.threshold("contraction", 3.0) == 2.0
    assert cfg.get("width") == 4
    assert cfg.omega == pytest.approx(2 * 1.5051499783199058 / 2.6989700043360187)
    d = cfg.to_dict()
    assert d["threshold_contraction"] == 2.0 and d["width"] == 4 and "out" not in d


def test_shipped_presets_parse():
    names = [p.name for p in resources.files("dbmlab").joinpath("presets").iterdir() if p.name.endswith(".yaml")]
    assert len(names) >= 8
    kinds = set()
    for name in names:
        cfg = validate_config(resources.files("dbmlab").joinpath("presets", name).read_text())
        kinds.add(cfg.kind)
    assert kinds == set(KINDS)
