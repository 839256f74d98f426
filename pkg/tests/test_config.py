from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from polaronlab.config import DEFAULTS, ConfigError, default_config, describe_defaults, load_config, parse_config


def test_defaults_cover_every_key():
    cfg = default_config()
    for section, keys in DEFAULTS.items():
        for key in keys:
            cfg[f"{section}.{key}"]
    assert cfg["model.g"] == Decimal("0.2")
    assert cfg["grid.n"] == (5,)
    assert cfg["pstar.eps_crit"] == "auto"


def test_shown_defaults_parse_back():
    assert parse_config(describe_defaults()).canonical() == default_config().canonical()


def test_round_trip_idempotent():
    text = "[model]\ng = 0.50\nlambda = INF\np = 0 0 1e-1\n[grid]\nn = 6 4\nkind = spherical_m0\n"
    once = parse_config(text).canonical()
    assert parse_config(once).canonical() == once
    assert "g = 0.5\n" in once and "lambda = inf\n" in once and "p = 0 0 0.1\n" in once


@given(st.decimals(min_value=Decimal("1e-6"), max_value=Decimal("1e6"), allow_nan=False, allow_infinity=False, places=6))
def test_number_canonical_form(d):
    a = parse_config(f"[model]\ng = {d}\n").canonical()
    b = parse_config(f"[model]\ng = {d.normalize():E}\n").canonical()
    assert a == b
    assert parse_config(a).canonical() == a


def test_equal_values_hash_equal():
    a = parse_config("[model]\ng = 0.2\n")
    b = parse_config("[model]\ng = 2e-1\n[solver]\ntol=1E-9\n")
    assert a.cache_key("solve") == b.cache_key("solve")
    assert a.cache_key("solve") != a.cache_key("gap")
    assert a.cache_key("solve", ("model",)) == a.with_overrides(["scan.p_values=0 1 2"]).cache_key("solve", ("model",))


@pytest.mark.parametrize(
    "text,needle",
    [
        ("[model]\ngee = 1\n", "model.gee"),
        ("[modle]\ng = 1\n", "modle"),
        ("[model]\ng = abc\n", "model.g"),
        ("[model]\ng = -1\n", "model.g"),
        ("[model]\nc = 0\n", "model.c"),
        ("[model]\ng = nan\n", "model.g"),
        ("[model]\np = 1 2\n", "model.p"),
        ("[fock]\nnmax = 1.5\n", "fock.nmax"),
        ("[grid]\nkind = hex\n", "grid.kind"),
        ("[grid]\nn = 4 4\n", "grid.n"),
        ("no section header\n", "malformed"),
    ],
)
def test_errors_name_the_key(text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config(text)


def test_overrides():
    cfg = default_config().with_overrides(["model.g=0", "FOCK.NMAX = 3"])
    assert cfg["model.g"] == 0 and cfg["fock.nmax"] == 3
    for bad in (["model.g"], ["g=1"], ["model.zeta=1"]):
        with pytest.raises(ConfigError):
            default_config().with_overrides(bad)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.ini")
