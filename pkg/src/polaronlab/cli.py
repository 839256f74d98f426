"""Command-line front end: ``polaronlab <command> [--config PATH] [--set section.key=value ...]``.

Commands: solve, scan-p, counterterm, uv-scan, ir-scan, gap, pstar, check.
Outputs go to ``<out>/<command>-<key8>.csv`` (or ``.json`` tables) plus a
``.json`` sidecar, written via temp file + rename.  Results are cached by
configuration hash under ``$POLARONLAB_CACHE`` (default ``~/.cache/polaronlab``).

Exit codes: 0 ok, 1 property failure, 2 config error, 3 resource budget,
4 non-convergence.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import os
import shutil
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from filelock import FileLock

from . import __version__, checks, renorm
from . import diagnostics as diag
from .config import ConfigError, RunConfig, default_config, describe_defaults, load_config
from .fock import enumerate_basis
from .grid import ResourceError, GridSpec, align_to_z, build_grid
from .model import ModelError, ModelParams

CACHE_ENV = "POLARONLAB_CACHE"

EXIT_OK, EXIT_PROPERTY, EXIT_CONFIG, EXIT_RESOURCE, EXIT_NONCONVERGED = 0, 1, 2, 3, 4

# config sections each command depends on (cache key scope)
SECTIONS = {
    "solve": ("model", "grid", "fock", "solver"),
    "scan-p": ("model", "grid", "fock", "solver", "scan"),
    "counterterm": ("model", "counterterm"),
    "uv-scan": ("model", "grid", "fock", "solver", "uv"),
    "ir-scan": ("model", "grid", "fock", "solver", "ir"),
    "gap": ("model", "grid", "fock", "solver", "gap"),
    "pstar": ("model", "grid", "fock", "solver", "pstar"),
    "check": ("check",),
}

UNITS = {
    "P": "momentum", "E": "energy", "residual": "energy", "Z": "1", "N_mean": "1", "dGamma_p_z": "momentum",
    "converged": "bool", "L": "momentum", "Lambda": "momentum", "kappa": "energy", "threshold": "energy",
    "gap": "energy", "Delta": "energy",
}


@dataclass
class Table:
    columns: tuple
    rows: list
    summary: str = ""
    meta: dict = field(default_factory=dict)
    converged: bool = True
    passed: bool = True


# ----------------------------------------------------------------- formatting

def _num(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _json(obj, indent=0) -> str:
    """JSON with every float printed to 17 significant digits; non-finite floats become null."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + _json(v, indent + 1) for v in obj) + f"\n{pad}]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return f"{float(obj):.17g}" if math.isfinite(obj) else "null"
    return json.dumps(str(obj))


def _csv_text(table: Table) -> str:
    buf = io.StringIO()
    buf.write(",".join(table.columns) + "\n")
    for row in table.rows:
        buf.write(",".join(_num(v) for v in row) + "\n")
    return buf.getvalue()


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_plotdata(table, path, units=None) -> Path:
    """Whitespace-separated columns under a '#' header naming columns and units.

    ``table`` is a ``ScanTable``, a ``Table`` or a ``(columns, rows)`` pair.
    An empty table raises ``ValueError`` and writes nothing.
    """
    if isinstance(table, diag.ScanTable):
        columns, rows = table.COLUMNS, table.as_records()
    elif isinstance(table, Table):
        columns, rows = table.columns, table.rows
    else:
        columns, rows = table
    if not rows:
        raise ValueError("refusing to write plot data for an empty table")
    units = {**UNITS, **(units or {})}
    path = Path(path)
    head = "# " + "  ".join(f"{c}[{units.get(c, '1')}]" for c in columns) + "\n"
    body = "".join(" ".join(_num(v) for v in row) + "\n" for row in rows)
    try:
        _atomic_write(path, (head + body).encode())
    except OSError as exc:
        raise OSError(f"cannot write plot data to {path}: {exc.strerror}") from exc
    return path


def read_plotdata(path):
    """Inverse of ``emit_plotdata``: (column names, float array of shape (rows, columns))."""
    with open(path) as fh:
        head = fh.readline()
        names = [c.split("[")[0] for c in head.lstrip("#").split()]
        data = np.loadtxt(fh, ndmin=2)
    return names, data


# ----------------------------------------------------------------- commands

def _params(cfg: RunConfig) -> ModelParams:
    P = [float(v) for v in cfg["model.p"]]
    P = (0.0, 0.0, P[0]) if len(P) == 1 else align_to_z(P)
    return ModelParams(cfg.float("model.c"), cfg.float("model.xi"), cfg.float("model.g"), cfg.float("model.kappa"),
                       cfg.float("model.lambda"), P)


def _grid_spec(cfg: RunConfig) -> GridSpec:
    n = cfg["grid.n"]
    ex = cfg["grid.exclude_origin"]
    return GridSpec(cfg["grid.kind"], cfg.float("grid.kmax"), n[0] if len(n) == 1 else n,
                    None if ex == "auto" else ex == "true")


def _opts(cfg: RunConfig) -> diag.SolverOptions:
    return diag.SolverOptions(cfg.float("solver.tol"), cfg["solver.max_iter"], cfg["solver.seed"])


def _setup(cfg):
    p = _params(cfg)
    grid = build_grid(_grid_spec(cfg), p)
    basis = enumerate_basis(grid.M, cfg["fock.nmax"], cfg["fock.max_states"])
    return p, grid, basis


def cmd_solve(cfg, threads):
    p, grid, basis = _setup(cfg)
    gs = diag.solve(grid, basis, p, _opts(cfg))
    obs = diag.observables(gs, grid, basis)
    row = [p.P[2], gs.energy, gs.residual, gs.iterations, gs.converged, obs["Z"], obs["N_mean"], obs["dGamma_p_z"], basis.dim]
    return Table(("P", "E", "residual", "iterations", "converged", "Z", "N_mean", "dGamma_p_z", "dim"), [row],
                 f"E = {_num(gs.energy)} residual {gs.residual:.2e} dim {basis.dim} modes {grid.M}",
                 {"grid_digest": grid.digest}, gs.converged)


def cmd_scan_p(cfg, threads):
    p, grid, basis = _setup(cfg)
    table = diag.scan_momentum(grid, p, cfg.floats("scan.p_values"), cfg["fock.nmax"], _opts(cfg), basis=basis, threads=threads)
    rep = diag.check_gross_convexity(table)
    meta = {"grid_digest": grid.digest, "gross_convexity_passed": rep.passed, "lower_margin": rep.lower_margin,
            "upper_margin": rep.upper_margin, "convexity_margin": rep.convexity_margin,
            "lipschitz_margin": rep.lipschitz_margin, "failures": rep.failures}
    conv = all(r.converged for r in table.rows)
    return Table(table.COLUMNS, table.as_records(),
                 f"{len(table.rows)} momenta, E(P_max) = {_num(table.rows[-1].E)}, Gross/convexity {'pass' if rep.passed else 'FAIL'}",
                 meta, conv)


def cmd_counterterm(cfg, threads):
    p = _params(cfg).replace(cutoff=math.inf, P=(0.0, 0.0, 0.0))
    l1 = cfg.floats("counterterm.l_values")
    l2 = cfg.floats("counterterm.l2_values")
    rtol = cfg.float("counterterm.sigma2_rtol")
    rows, conv = [], True
    s1, s2 = {}, {}
    for L in sorted(set(l1) | set(l2)):
        a = renorm.sigma1(p, L)
        b = renorm.sigma2(p, L, rtol=rtol)
        conv &= a.converged and b.converged
        s1[L], s2[L] = a.value, b.value
        rows.append([L, a.value, a.error, b.value, b.error])
    meta = {"mu": cfg.float("counterterm.mu")}
    parts = []
    for name, form, Ls, vals in (("e1", renorm.LINEAR, l1, s1), ("e2", renorm.LOG, l2, s2)):
        if len(Ls) >= 4:
            fit = renorm.fit_divergence([(L, vals[L]) for L in Ls], form)
            meta[name] = fit.coefficient
            meta[f"{name}_offset"] = fit.offset
            meta[f"{name}_residual"] = fit.residual
            parts.append(f"{name} = {_num(fit.coefficient)}")
    return Table(("L", "sigma1", "sigma1_err", "sigma2", "sigma2_err"), rows, ", ".join(parts) or f"{len(rows)} cutoffs", meta, conv)


def cmd_uv_scan(cfg, threads):
    p = _params(cfg)
    scan = diag.scan_regularization("uv", _grid_spec(cfg), p, cfg.floats("uv.lambda_values"), cfg["fock.nmax"], _opts(cfg),
                                    sigma2_rtol=cfg.float("uv.sigma2_rtol"), threads=threads)
    drift = scan.summary["subtracted_drift_fraction"]
    return Table(scan.columns, scan.rows, f"{len(scan.rows)} cutoffs, max subtracted drift fraction {max(drift, default=0.0):.3g}",
                 scan.summary, all(scan.converged))


def cmd_ir_scan(cfg, threads):
    p = _params(cfg)
    scan = diag.scan_regularization("ir", _grid_spec(cfg), p, cfg.floats("ir.kappa_values"), cfg["fock.nmax"], _opts(cfg),
                                    threads=threads)
    s = scan.summary
    return Table(scan.columns, scan.rows,
                 f"E(kappa->0) = {_num(s['E_extrapolated'])} +- {s['extrapolation_error']:.2e}, monotone {s['monotone']}",
                 s, all(scan.converged), bool(s["monotone"]))


def cmd_gap(cfg, threads):
    p, grid, basis = _setup(cfg)
    rows, conv, ok = [], True, True
    for P in cfg.floats("gap.p_values"):
        rep = diag.hvz_gap(grid, p, P * p.c, cfg["fock.nmax"], _opts(cfg), basis=basis)
        rows.append([P * p.c, rep.energy, rep.threshold, rep.gap, rep.kappa, rep.passed])
        conv &= rep.converged
        ok &= rep.passed
    worst = min(r[3] for r in rows)
    return Table(("P", "E", "threshold", "gap", "kappa", "passed"), rows,
                 f"min gap {_num(worst)} vs kappa {_num(p.kappa)}: {'pass' if ok else 'FAIL'}", {"grid_digest": grid.digest}, conv, ok)


def cmd_pstar(cfg, threads):
    p, grid, basis = _setup(cfg)
    eps = cfg["pstar.eps_crit"]
    rep = diag.estimate_pstar(grid, p, cfg.floats("pstar.p_values"), cfg["fock.nmax"], _opts(cfg),
                              eps_crit=None if eps == "auto" else float(eps), z_crit=cfg.float("pstar.z_crit"), basis=basis)
    meta = {"pstar_threshold": rep.pstar_threshold, "pstar_residue": rep.pstar_residue, "mass_threshold": rep.mass_threshold,
            "mass_residue": rep.mass_residue, "pstar_decoupled": rep.pstar_decoupled, "eps_grid": rep.eps_grid,
            "eps_crit": rep.eps_crit, "z_crit": rep.z_crit}
    return Table(("P", "E", "threshold", "Delta", "Z"), [list(r) for r in rep.curve],
                 f"P_* {rep.describe(rep.pstar_threshold)} (threshold), {rep.describe(rep.pstar_residue)} (residue); "
                 f"c - eps_grid = {_num(p.c - rep.eps_grid)}", meta, rep.converged)


def cmd_check(cfg, threads):
    results = checks.run_suite(cfg["check.level"], report=print)
    rows = [[r.name, r.passed, r.detail, r.elapsed] for r in results]
    failed = [r.name for r in results if not r.passed]
    summary = f"{len(results) - len(failed)}/{len(results)} properties hold" + (f"; failed: {', '.join(failed)}" if failed else "")
    return Table(("name", "passed", "detail", "elapsed"), rows, summary, {}, True, not failed)


COMMANDS = {
    "solve": cmd_solve,
    "scan-p": cmd_scan_p,
    "counterterm": cmd_counterterm,
    "uv-scan": cmd_uv_scan,
    "ir-scan": cmd_ir_scan,
    "gap": cmd_gap,
    "pstar": cmd_pstar,
    "check": cmd_check,
}


# ----------------------------------------------------------------- persistence

def cache_root() -> Path:
    return Path(os.environ.get(CACHE_ENV) or Path.home() / ".cache" / "polaronlab")


def _bundle(command, cfg, key, table: Table, fmt) -> dict:
    """File name -> bytes for one finished run."""
    stem = f"{command}-{key[:8]}"
    side = {"command": command, "version": __version__, "cache_key": key, "summary": table.summary,
            "converged": table.converged, "passed": table.passed, "columns": list(table.columns),
            "config": cfg.canonical(SECTIONS[command]), "meta": table.meta}
    files = {}
    if fmt == "json":
        side["rows"] = table.rows
    else:
        files[f"{stem}.csv"] = _csv_text(table).encode()
    files[f"{stem}.json"] = (_json(side) + "\n").encode()
    return files


def _cache_get(root: Path, key: str):
    entry = root / key
    if not (entry / "summary.txt").is_file():
        return None
    files = {p.name: p.read_bytes() for p in entry.iterdir() if p.name != "summary.txt"}
    status, summary = (entry / "summary.txt").read_text().split("\n", 1)
    return files, summary, status == "passed"


def _cache_put(root: Path, key: str, files: dict, summary: str, passed: bool):
    root.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(dir=root, prefix=".entry-"))
    for name, data in files.items():
        (tmp / name).write_bytes(data)
    (tmp / "summary.txt").write_text(("passed" if passed else "failed") + "\n" + summary)
    dest = root / key
    if dest.exists():
        shutil.rmtree(tmp)
    else:
        os.replace(tmp, dest)


def clear_cache(root: Path | None = None) -> int:
    root = root or cache_root()
    if not root.exists():
        return 0
    with FileLock(str(root / ".lock")):
        entries = [p for p in root.iterdir() if p.is_dir()]
        for p in entries:
            shutil.rmtree(p)
    return len(entries)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polaronlab", description="Truncated Fock-space polaron laboratory.")
    ap.add_argument("--version", action="version", version=f"polaronlab {__version__}")
    ap.add_argument("--clear-cache", action="store_true", help="empty the result cache first")
    ap.add_argument("--show-defaults", action="store_true", help="print every config key with its default")
    sub = ap.add_subparsers(dest="command")
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="INI configuration file")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override one key (repeatable)")
        sp.add_argument("--out", help="output directory (default: output.directory)")
        sp.add_argument("--threads", type=int, default=1, help="parallel solves in scans")
        sp.add_argument("--no-cache", action="store_true", help="recompute and do not store")
        sp.add_argument("--clear-cache", action="store_true", help="empty the result cache first")
        sp.add_argument("--format", choices=("csv", "json"), help="table format (default: output.format)")
        sp.add_argument("--plot", action="store_true", help="also write whitespace-separated plot data (.dat)")
    return ap


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.show_defaults:
        print(describe_defaults())
        return EXIT_OK
    if args.clear_cache:
        print(f"cleared {clear_cache()} cache entries")
    if args.command is None:
        return EXIT_OK if (args.clear_cache or args.show_defaults) else EXIT_CONFIG
    try:
        cfg = load_config(args.config) if args.config else default_config()
        cfg = cfg.with_overrides(args.set)
        fmt = args.format or cfg["output.format"]
        out = Path(args.out or cfg["output.directory"])
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        return _execute(args, cfg, fmt, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ModelError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceError as exc:
        print(f"resource budget: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


def _execute(args, cfg, fmt, out: Path) -> int:
    command = args.command
    key = _keyed(cfg.cache_key(command, SECTIONS[command]), fmt)
    out.mkdir(parents=True, exist_ok=True)
    root = cache_root()
    use_cache = not args.no_cache and command != "check"
    t0 = time.perf_counter()

    if use_cache:
        root.mkdir(parents=True, exist_ok=True)
        with FileLock(str(root / ".lock")):
            hit = _cache_get(root, key)
        if hit is not None:
            files, summary, passed = hit
            for name, data in files.items():
                _atomic_write(out / name, data)
            print(f"{command}: {summary} (cached, {key[:8]})")
            return EXIT_OK if passed else EXIT_PROPERTY

    table = COMMANDS[command](cfg, args.threads)
    files = _bundle(command, cfg, key, table, fmt)
    for name, data in files.items():
        _atomic_write(out / name, data)
    if args.plot and table.rows:
        emit_plotdata(table, out / f"{command}-{key[:8]}.dat")
    dt = time.perf_counter() - t0
    print(f"{command}: {table.summary} ({dt:.1f} s, {key[:8]})")
    if not table.converged:
        print(f"{command}: some solves did not converge", file=sys.stderr)
        return EXIT_NONCONVERGED
    if use_cache:
        with FileLock(str(root / ".lock")):
            _cache_put(root, key, files, table.summary, table.passed)
    return EXIT_OK if table.passed else EXIT_PROPERTY


def _keyed(key: str, fmt: str) -> str:
    return hashlib.sha256(f"{key}\nformat = {fmt}".encode()).hexdigest()


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
