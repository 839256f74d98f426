"""Run configuration: sectioned INI text with exact decimal parsing.

Every key has a default listed in ``DEFAULTS``; unknown sections or keys are
errors.  Numbers are parsed with ``decimal.Decimal`` and kept as decimals
until a computation needs a float, so the canonical text (and hence the
cache key) does not depend on float formatting.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

from . import __version__


class ConfigError(ValueError):
    """Bad configuration; the message names the offending key."""


# section -> key -> (kind, default text, help)
DEFAULTS = {
    "model": {
        "c": ("number", "1", "speed of sound"),
        "xi": ("number", "1", "inverse double boson mass"),
        "g": ("number", "0.2", "coupling constant"),
        "kappa": ("number", "0.1", "infrared mass"),
        "lambda": ("number", "2", "ultraviolet cutoff, 'inf' for none"),
        "p": ("numbers", "0", "total momentum: |P| along z, or three components"),
    },
    "grid": {
        "kind": ("choice:cartesian,spherical_m0", "cartesian", "mode layout"),
        "kmax": ("number", "2", "grid radius"),
        "n": ("integers", "5", "points per axis, or 'n_radial n_angular'"),
        "exclude_origin": ("choice:auto,true,false", "auto", "drop the k = 0 cell (auto: odd n)"),
    },
    "fock": {
        "nmax": ("integer", "2", "phonon-number cap"),
        "max_states": ("integer", "2000000", "basis size budget"),
    },
    "solver": {
        "tol": ("number", "1e-9", "residual tolerance"),
        "max_iter": ("integer", "5000", "matrix-vector product budget"),
        "seed": ("integer", "0", "start-vector seed"),
    },
    "scan": {
        "p_values": ("numbers", "0 0.1 0.2 0.3 0.4 0.5 0.6 0.7 0.8 0.9", "momenta for scan-p"),
    },
    "counterterm": {
        "l_values": ("numbers", "200 400 800 1600", "cutoffs for sigma1"),
        "l2_values": ("numbers", "25 50 100 200 400", "cutoffs for sigma2"),
        "sigma2_rtol": ("number", "1e-4", "relative quadrature tolerance for sigma2"),
        "mu": ("number", "1", "kernel shift parameter"),
    },
    "uv": {
        "lambda_values": ("numbers", "0.5 1 1.5 2", "ascending cutoff schedule (<= kmax)"),
        "sigma2_rtol": ("number", "1e-4", "relative quadrature tolerance for sigma2"),
    },
    "ir": {
        "kappa_values": ("numbers", "0.2 0.1 0.05 0.02 0.01", "descending phonon-mass schedule"),
    },
    "gap": {
        "p_values": ("numbers", "0 0.5 1", "momenta, in units of c"),
    },
    "pstar": {
        "p_values": ("numbers", "0 0.1 0.2 0.3 0.4 0.5 0.6 0.7 0.8 0.9 1 1.1 1.2 1.3 1.4 1.5", "ascending momenta"),
        "eps_crit": ("number", "auto", "threshold margin criterion (auto: 1e-3 c^2)"),
        "z_crit": ("number", "0.1", "residue criterion"),
    },
    "check": {
        "level": ("choice:reduced,full", "reduced", "problem sizes of the property suite"),
    },
    "output": {
        "directory": ("text", "results", "output directory"),
        "format": ("choice:csv,json", "csv", "table format; a JSON sidecar is always written"),
    },
}


def _parse_number(key, text):
    t = text.strip().lower()
    if t in ("auto",):
        return "auto"
    if t in ("inf", "infinity", "+inf"):
        return Decimal("Infinity")
    try:
        d = Decimal(t)
    except InvalidOperation:
        raise ConfigError(f"{key}: not a number: {text!r}") from None
    if d.is_nan():
        raise ConfigError(f"{key}: NaN is not allowed")
    return d


def _parse_integer(key, text):
    d = _parse_number(key, text)
    if d == "auto" or not d.is_finite() or d != d.to_integral_value():
        raise ConfigError(f"{key}: not an integer: {text!r}")
    return int(d)


def _split(text):
    return [t for t in text.replace(",", " ").split() if t]


def _parse_value(key, kind, text):
    if kind == "number":
        return _parse_number(key, text)
    if kind == "integer":
        return _parse_integer(key, text)
    if kind == "numbers":
        vals = [_parse_number(key, t) for t in _split(text)]
        if not vals or "auto" in vals:
            raise ConfigError(f"{key}: expected a list of numbers, got {text!r}")
        return tuple(vals)
    if kind == "integers":
        vals = tuple(_parse_integer(key, t) for t in _split(text))
        if not vals:
            raise ConfigError(f"{key}: expected integers, got {text!r}")
        return vals
    if kind.startswith("choice:"):
        options = kind.split(":", 1)[1].split(",")
        t = text.strip().lower()
        if t not in options:
            raise ConfigError(f"{key}: {text!r} is not one of {options}")
        return t
    return text.strip()


def _format_number(d) -> str:
    if d == "auto":
        return "auto"
    if d.is_infinite():
        return "inf" if d > 0 else "-inf"
    if d == d.to_integral_value() and abs(d) < Decimal(10) ** 15:
        return str(int(d))
    return format(d.normalize(), "f") if -7 <= d.normalize().adjusted() <= 15 else format(d.normalize(), "e")


def _format_value(kind, value) -> str:
    if kind == "number":
        return _format_number(value)
    if kind == "numbers":
        return " ".join(_format_number(v) for v in value)
    if kind == "integers":
        return " ".join(str(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class RunConfig:
    values: dict  # section -> key -> parsed value

    def __getitem__(self, dotted: str):
        section, key = dotted.split(".", 1)
        return self.values[section][key]

    def float(self, dotted: str) -> float:
        return float(self[dotted])

    def floats(self, dotted: str) -> list:
        return [float(v) for v in self[dotted]]

    def canonical(self, sections=None) -> str:
        """Canonical text: fixed section and key order, normalized numbers."""
        out = []
        for section, keys in DEFAULTS.items():
            if sections is not None and section not in sections:
                continue
            out.append(f"[{section}]")
            for key, (kind, _, _) in keys.items():
                out.append(f"{key} = {_format_value(kind, self.values[section][key])}")
            out.append("")
        return "\n".join(out)

    def cache_key(self, command: str, sections=None) -> str:
        text = f"polaronlab {__version__}\ncommand = {command}\n" + self.canonical(sections)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def with_overrides(self, overrides) -> "RunConfig":
        vals = {s: dict(k) for s, k in self.values.items()}
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            dotted, text = item.split("=", 1)
            dotted = dotted.strip().lower()
            if "." not in dotted:
                raise ConfigError(f"override key {dotted!r} needs the form section.key")
            section, key = dotted.split(".", 1)
            kind = _lookup(section, key)
            vals[section][key] = _parse_value(dotted, kind, text)
        return _validated(vals)


def _lookup(section, key):
    if section not in DEFAULTS:
        raise ConfigError(f"unknown section [{section}]")
    if key not in DEFAULTS[section]:
        raise ConfigError(f"{section}.{key}: unknown key")
    return DEFAULTS[section][key][0]


def _validated(vals) -> RunConfig:
    def positive(dotted):
        s, k = dotted.split(".")
        if not vals[s][k] > 0:
            raise ConfigError(f"{dotted}: must be positive")

    for dotted in ("model.c", "model.xi", "model.lambda", "grid.kmax", "solver.tol", "solver.max_iter", "fock.max_states",
                   "counterterm.sigma2_rtol", "counterterm.mu", "uv.sigma2_rtol", "pstar.z_crit"):
        positive(dotted)
    for dotted in ("model.g", "model.kappa", "fock.nmax"):
        s, k = dotted.split(".")
        if vals[s][k] < 0:
            raise ConfigError(f"{dotted}: must be non-negative")
    if vals["pstar"]["eps_crit"] != "auto" and not vals["pstar"]["eps_crit"] > 0:
        raise ConfigError("pstar.eps_crit: must be positive or auto")
    for key in ("c", "xi", "g", "kappa"):
        if not vals["model"][key].is_finite():
            raise ConfigError(f"model.{key}: must be finite")
    if len(vals["model"]["p"]) not in (1, 3):
        raise ConfigError("model.p: give |P| or three components")
    n = vals["grid"]["n"]
    want = 1 if vals["grid"]["kind"] == "cartesian" else (1, 2)
    if (len(n) != want if isinstance(want, int) else len(n) not in want) or min(n) < 1:
        raise ConfigError(f"grid.n: bad point counts {n} for kind {vals['grid']['kind']}")
    return RunConfig(vals)


def default_config() -> RunConfig:
    return parse_config("")


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str.lower
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    vals = {s: {k: _parse_value(f"{s}.{k}", kind, d) for k, (kind, d, _) in keys.items()} for s, keys in DEFAULTS.items()}
    for section in cp.sections():
        for key, text_value in cp.items(section):
            kind = _lookup(section.lower(), key)
            vals[section.lower()][key] = _parse_value(f"{section}.{key}", kind, text_value)
    return _validated(vals)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None


def describe_defaults() -> str:
    """Commented INI listing every key, its default and meaning."""
    lines = []
    for section, keys in DEFAULTS.items():
        lines.append(f"[{section}]")
        for key, (_, default, help_) in keys.items():
            lines.append(f"# {help_}")
            lines.append(f"{key} = {default}")
        lines.append("")
    return "\n".join(lines)
