"""Pass/fail property checks shared by the acceptance tests and ``polaronlab check``.

Each check takes its problem sizes as keyword arguments and returns a
``CheckResult``; ``FULL`` and ``REDUCED`` hold the two size presets.
A check passes only if its property holds and it finished within budget.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import diagnostics as diag
from . import renorm
from .fock import SparseHamiltonian, enumerate_basis
from .grid import CARTESIAN, GridSpec, build_grid
from .model import ModelParams
from .solver import dense_ground_oracle, lanczos_ground


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    elapsed: float
    budget: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name}: {self.detail} [{self.elapsed:.1f} s / {self.budget:g} s]"


def _timed(name, budget, fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    dt = time.perf_counter() - t0
    if dt > budget:
        ok, detail = False, detail + "; over time budget"
    return CheckResult(name, bool(ok), detail, dt, budget)


def counterterm_linear_divergence(cutoffs=(200, 400, 800, 1600), rel=0.02, budget=10.0) -> CheckResult:
    """Fitted slope of sigma1 at c = xi = g = 1 against -8 pi / 3."""

    def run():
        p = ModelParams(c=1.0, xi=1.0, g=1.0, kappa=0.0)
        samples = [(L, renorm.sigma1(p, L).value) for L in cutoffs]
        fit = renorm.fit_divergence(samples, renorm.LINEAR)
        target = -8.0 * math.pi / 3.0
        dev = abs(fit.coefficient - target) / abs(target)
        return dev <= rel, f"e1 = {fit.coefficient:.6f} vs {target:.6f} (rel {dev:.2e}, limit {rel:g})"

    return _timed("counterterm linear divergence", budget, run)


def counterterm_log_divergence(cutoffs=(25, 50, 100, 200), rtol=1e-4, spread=0.10, fit_rel=0.05, budget=600.0) -> CheckResult:
    """Doubling differences of sigma2 are constant and the log fit is tight.

    The differences sigma2(2L) - sigma2(L) are taken for every listed L, so
    the largest cutoff evaluated is 2 max(cutoffs); the fit uses all points.
    """

    def run():
        p = ModelParams(c=1.0, xi=1.0, g=1.0, kappa=0.0)
        Ls = sorted(set(cutoffs) | {2 * L for L in cutoffs})
        vals = {}
        for L in Ls:
            res = renorm.sigma2(p, L, rtol=rtol)
            if not res.converged:
                return False, f"sigma2 at L = {L} did not converge"
            vals[L] = res.value
        diffs = np.array([vals[2 * L] - vals[L] for L in cutoffs])
        s = float((diffs.max() - diffs.min()) / abs(diffs.mean()))
        fit = renorm.fit_divergence([(L, vals[L]) for L in Ls], renorm.LOG)
        q = fit.residual / abs(fit.coefficient)
        ok = s <= spread and q < fit_rel
        return ok, (f"differences {np.array2string(diffs, precision=4)} spread {s:.3f} (limit {spread:g}); "
                    f"e2 = {fit.coefficient:.4f}, residual/|e2| = {q:.4f} (limit {fit_rel:g})")

    return _timed("counterterm log divergence", budget, run)


def counterterm_small_cutoff_law(L=1e-3, rel=0.01, budget=1.0) -> CheckResult:
    """sigma1 against -4 pi g^2 L^3 / (3 c^2) at a small cutoff."""

    def run():
        p = ModelParams(c=1.0, xi=1.0, g=1.0, kappa=0.0)
        val = renorm.sigma1(p, L).value
        law = -4.0 * math.pi * p.g**2 * L**3 / (3.0 * p.c**2)
        ratio = val / law
        return abs(ratio - 1.0) <= rel, f"ratio {ratio:.6f} at L = {L:g} (limit 1 +- {rel:g})"

    return _timed("small-cutoff cubic law", budget, run)


def perturbative_quartic_scaling(n=4, kmax=2.0, cutoff=2.0, nmax=2, kappa=0.05, P=0.3, couplings=(0.1, 0.05), factor=12.0,
                                 budget=60.0) -> CheckResult:
    """|E_lanczos - E_pt2| shrinks by at least ``factor`` when g is halved."""

    def run():
        gaps = []
        for g in couplings:
            p = ModelParams(g=g, kappa=kappa, cutoff=cutoff, P=(0.0, 0.0, P))
            grid = build_grid(GridSpec(CARTESIAN, kmax, n), p)
            basis = enumerate_basis(grid.M, nmax)
            gs = diag.solve(grid, basis, p, diag.SolverOptions(tol=1e-12))
            if not gs.converged:
                return False, f"solve at g = {g} did not converge"
            gaps.append(abs(gs.energy - diag.pt2_energy(grid, p)))
        ratio = gaps[0] / gaps[1]
        return ratio >= factor, (f"|E - E_pt2| = {gaps[0]:.3e} -> {gaps[1]:.3e}, ratio {ratio:.2f} (need >= {factor:g}); "
                                 f"n = {n}, N_max = {nmax}")

    return _timed("perturbative quartic scaling", budget, run)


def _pipeline(n, kmax, cutoff, g, kappa):
    p = ModelParams(g=g, kappa=kappa, cutoff=cutoff)
    return p, build_grid(GridSpec(CARTESIAN, kmax, n), p)


def gross_convexity_suite(n=5, kmax=2.0, cutoff=2.0, g=0.2, kappa=0.1, nmax=2, P_values=tuple(np.round(np.arange(10) * 0.1, 10)),
                          tol=1e-8, budget=300.0) -> CheckResult:
    """Gross bounds, convexity and the Lipschitz bound on a momentum scan."""

    def run():
        p, grid = _pipeline(n, kmax, cutoff, g, kappa)
        table = diag.scan_momentum(grid, p, P_values, nmax, diag.SolverOptions(tol=tol))
        bad = [r.P for r in table.rows if not r.converged]
        rep = diag.check_gross_convexity(table, tol)
        detail = (f"margins: lower {rep.lower_margin:.3e}, upper {rep.upper_margin:.3e}, "
                  f"convexity {rep.convexity_margin:.3e}, Lipschitz {rep.lipschitz_margin:.3e}")
        if bad:
            detail += f"; unconverged at P = {bad}"
        if rep.failures:
            detail += "; " + rep.failures[0]
        return rep.passed and not bad, detail

    return _timed("Gross, convexity and Lipschitz bounds", budget, run)


def hvz_gap_suite(n=5, kmax=2.0, cutoff=2.0, g=0.2, kappas=(0.05, 0.1, 0.2), P_values=(0.0, 0.5, 1.0), nmax=2, tol=1e-8,
                  budget=600.0) -> CheckResult:
    """gap >= kappa - 4 tol at every (kappa, P)."""

    def run():
        p, grid = _pipeline(n, kmax, cutoff, g, kappas[0])
        basis = enumerate_basis(grid.M, nmax)
        worst = math.inf
        where = None
        ok = True
        for kap in kappas:
            for P in P_values:
                rep = diag.hvz_gap(grid, p.replace(kappa=kap), P * p.c, nmax, diag.SolverOptions(tol=tol), basis=basis)
                ok &= rep.passed and rep.converged
                margin = rep.gap - kap
                if margin < worst:
                    worst, where = margin, (kap, P)
        return ok, f"min gap - kappa = {worst:.4e} at (kappa, P) = {where} (need >= {-4 * tol:.0e})"

    return _timed("HVZ gap", budget, run)


def pullthrough_suite(sizes=(4, 6), kmax=2.0, cutoff=2.0, g=0.2, kappa=0.1, P=0.5, nmax=2, slack=0.25, stability=0.05,
                      budget=600.0) -> CheckResult:
    """Per-mode resolvent bounds at every size and max envelope stable under refinement."""

    def run():
        p = ModelParams(g=g, kappa=kappa, cutoff=cutoff, P=(0.0, 0.0, P))
        rs, ok, notes = [], True, []
        for n in sizes:
            grid = build_grid(GridSpec(CARTESIAN, kmax, n), p)
            basis = enumerate_basis(grid.M, nmax)
            gs = diag.solve(grid, basis, p, diag.SolverOptions(tol=1e-10))
            rep = diag.pullthrough_envelope(gs, grid, basis, p, slack=slack)
            ok &= rep.passed and gs.converged
            rs.append(rep.r)
            notes.append(f"n={n}: r = {rep.r:.5f}, worst bound ratios {rep.worst_linear:.3f}/{rep.worst_quadratic:.3f}")
        change = abs(rs[-1] - rs[0]) / rs[0]
        ok &= change <= stability
        return ok, "; ".join(notes) + f"; change {change:.3%} (limit {stability:.0%})"

    return _timed("pull-through envelope", budget, run)


def critical_momentum_suite(n=7, kmax=1.0, couplings=(0.0, 0.1), P_values=tuple(np.round(np.arange(16) * 0.1, 10)), nmax=2,
                            tol=1e-8, budget=900.0) -> CheckResult:
    """P_* estimate stays above c - eps_grid."""

    def run():
        ok, notes = True, []
        for g in couplings:
            p = ModelParams(g=g, kappa=0.0)
            grid = build_grid(GridSpec(CARTESIAN, kmax, n), p)
            rep = diag.estimate_pstar(grid, p, P_values, nmax, diag.SolverOptions(tol=tol))
            floor = p.c - rep.eps_grid
            # a schedule that never meets the criterion certifies P_* > max P
            est = rep.pstar_threshold if rep.pstar_threshold is not None else math.inf
            ok &= est >= floor and rep.converged
            notes.append(f"g={g:g}: P_* {rep.describe(rep.pstar_threshold)} (residue criterion {rep.describe(rep.pstar_residue)}), "
                         f"floor c - eps_grid = {floor:.4f}")
        return ok, "; ".join(notes)

    return _timed("critical momentum bound", budget, run)


def infrared_extrapolation_suite(n=5, kmax=2.0, cutoff=2.0, g=0.2, kappas=(0.2, 0.1, 0.05, 0.02, 0.01), nmax=2, tol=1e-9, limit=1e-3,
                                 budget=600.0) -> CheckResult:
    """E monotone in kappa and the kappa -> 0 extrapolation within limit c^2 of the last point."""

    def run():
        p = ModelParams(g=g, kappa=kappas[0], cutoff=cutoff)
        scan = diag.scan_regularization("ir", GridSpec(CARTESIAN, kmax, n), p, kappas, nmax, diag.SolverOptions(tol=tol))
        last = scan.rows[-1][1]
        extrap = scan.summary["E_extrapolated"]
        dev = abs(extrap - last)
        ok = scan.summary["monotone"] and all(scan.converged) and dev <= limit * p.c**2
        return ok, (f"monotone {scan.summary['monotone']}, E(kappa={kappas[-1]:g}) = {last:.8f}, extrapolated {extrap:.8f} "
                    f"+- {scan.summary['extrapolation_error']:.1e}, |diff| = {dev:.3e} (limit {limit * p.c**2:g}); "
                    f"N_mean = {scan.rows[-1][2]:.4f}")

    return _timed("infrared extrapolation", budget, run)


def random_sparse_symmetric(dim: int, density: float, rng) -> SparseHamiltonian:
    d = rng.standard_normal(dim)
    m = max(1, int(density * dim * (dim - 1) / 2))
    r = rng.integers(0, dim, size=m)
    c = rng.integers(0, dim, size=m)
    keep = r != c
    lo, hi = np.minimum(r[keep], c[keep]), np.maximum(r[keep], c[keep])
    pairs = np.unique(np.column_stack([lo, hi]), axis=0)
    vals = rng.standard_normal(len(pairs))
    return SparseHamiltonian(dim, d, pairs[:, 0], pairs[:, 1], vals)


def solver_vs_dense_oracle(count=50, max_dim=500, tol=1e-9, seed=1234, budget=60.0) -> CheckResult:
    """Lanczos ground energies against the in-repo dense eigensolver."""

    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(count):
            dim = int(rng.integers(2, max_dim + 1))
            h = random_sparse_symmetric(dim, float(rng.uniform(0.005, 0.05)), rng)
            gs = lanczos_ground(h, tol=0.1 * tol)
            if not gs.converged:
                return False, f"Lanczos did not converge at dim {dim}"
            worst = max(worst, abs(gs.energy - dense_ground_oracle(h)))
        return worst <= tol, f"max |E_lanczos - E_dense| = {worst:.2e} over {count} matrices (limit {tol:g})"

    return _timed("solver vs dense oracle", budget, run)


PIPELINE_CHECKS = {
    "perturbative": perturbative_quartic_scaling,
    "gross": gross_convexity_suite,
    "hvz": hvz_gap_suite,
    "pullthrough": pullthrough_suite,
    "pstar": critical_momentum_suite,
    "infrared": infrared_extrapolation_suite,
    "solver": solver_vs_dense_oracle,
}

FULL = {name: {} for name in PIPELINE_CHECKS}

# The ``check`` subcommand shrinks only the items whose full size is slow;
# the cheap ones run exactly as in the acceptance suite.
REDUCED = {name: {} for name in PIPELINE_CHECKS}
REDUCED["pstar"] = dict(n=5, P_values=tuple(np.round(np.arange(9) * 0.2, 10)))
REDUCED["solver"] = dict(count=20, max_dim=300)


def run_suite(level: str = "reduced", only=None, report=print) -> list:
    sizes = REDUCED if level == "reduced" else FULL
    out = []
    for name, fn in PIPELINE_CHECKS.items():
        if only and name not in only:
            continue
        res = fn(**sizes[name])
        if report:
            report(res.line())
        out.append(res)
    return out
