"""Numerical checks of the provable statements about E(P) on the truncated model.

Every routine works on the discrete Hamiltonian built by :mod:`polaronlab.fock`.
Reports are plain dataclasses; a violated inequality produces a failing
report rather than an exception.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import renorm
from .fock import (
    FockBasis,
    annihilation_matrix,
    assemble,
    enumerate_basis,
    mode_couplings,
    mode_occupations,
    total_momentum,
)
from .grid import CARTESIAN, Grid, GridSpec, build_grid
from .model import ModelError, ModelParams, dispersion, form_factor
from .solver import DEFAULT_TOL, GroundStateResult, lanczos_ground


@dataclass(frozen=True)
class SolverOptions:
    tol: float = DEFAULT_TOL
    max_iter: int = 5000
    seed: int = 0
    krylov_dim: int | None = None


def _pvec(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    return np.array([0.0, 0.0, float(P)]) if P.ndim == 0 else P


def solve(grid: Grid, basis: FockBasis, params: ModelParams, opts: SolverOptions = SolverOptions()) -> GroundStateResult:
    h = assemble(grid, basis, params)
    return lanczos_ground(h, tol=opts.tol, max_iter=opts.max_iter, seed=opts.seed, krylov_dim=opts.krylov_dim)


def observables(gs: GroundStateResult, grid: Grid, basis: FockBasis) -> dict:
    prob = gs.vector**2
    K = total_momentum(grid, basis)
    return {
        "Z": float(prob[0]),
        "N_mean": float(prob @ basis.number),
        "dGamma_p_z": float(prob @ K[:, 2]),
    }


class _EnergyCache:
    """Ground energies keyed by total momentum, folded by the grid's symmetry.

    A cartesian grid is invariant under the 48 signed coordinate
    permutations, so E(Q) depends only on the sorted |Q_i|.
    """

    def __init__(self, grid, basis, params, opts):
        self.grid, self.basis, self.params, self.opts = grid, basis, params, opts
        self.store: dict = {}
        self.residuals: list = []
        self.solves = 0
        self.all_converged = True

    def key(self, Q):
        if self.grid.spec.kind == CARTESIAN:
            return tuple(np.round(np.sort(np.abs(Q)), 12))
        return tuple(np.round(Q, 12))

    def energy(self, Q) -> float:
        Q = np.asarray(Q, dtype=float)
        key = self.key(Q)
        if key not in self.store:
            gs = solve(self.grid, self.basis, self.params.replace(P=tuple(Q)), self.opts)
            self.solves += 1
            self.all_converged &= gs.converged
            self.residuals.append(gs.residual)
            self.store[key] = gs.energy
        return self.store[key]


def pt2_energy(grid: Grid, params: ModelParams, P=None) -> float:
    """Second-order perturbation theory on the discrete mode sum.

    E = P^2/2 - sum_j g_j^2 / (|P - k_j|^2/2 + omega_kappa(k_j) - P^2/2).
    """
    Pv = params.P_vec if P is None else _pvec(P)
    gj = mode_couplings(grid, params)
    den = 0.5 * np.sum((Pv - grid.k) ** 2, axis=1) + dispersion(grid.k, params) - 0.5 * Pv @ Pv
    active = gj != 0.0
    bad = np.flatnonzero(active & (den <= 0.0))
    if len(bad):
        j = int(bad[0])
        raise ModelError(f"perturbative denominator {den[j]:.3g} <= 0 at mode {j}, k = {grid.k[j].tolist()}")
    return float(0.5 * Pv @ Pv - np.sum(gj[active] ** 2 / den[active]))


@dataclass
class ScanRow:
    P: float
    E: float
    residual: float
    Z: float
    N_mean: float
    dGamma_p_z: float
    converged: bool = True


@dataclass
class ScanTable:
    rows: list
    meta: dict = field(default_factory=dict)

    COLUMNS = ("P", "E", "residual", "Z", "N_mean", "dGamma_p_z", "converged")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def as_records(self) -> list:
        return [[getattr(r, c) for c in self.COLUMNS] for r in self.rows]


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))  # results come back in schedule order


def scan_momentum(
    grid: Grid,
    params: ModelParams,
    P_list,
    nmax: int,
    opts: SolverOptions = SolverOptions(),
    basis: FockBasis | None = None,
    threads: int = 1,
) -> ScanTable:
    """Ground state along P e_z for every P in ``P_list``."""
    P_list = [float(x) for x in P_list]
    if any(b < a for a, b in zip(P_list, P_list[1:])):
        raise ValueError("P_list must be ascending")
    basis = basis or enumerate_basis(grid.M, nmax)

    def one(P):
        gs = solve(grid, basis, params.replace(P=(0.0, 0.0, P)), opts)
        obs = observables(gs, grid, basis)
        return ScanRow(P, gs.energy, gs.residual, obs["Z"], obs["N_mean"], obs["dGamma_p_z"], gs.converged)

    rows = _map(one, P_list, threads)
    meta = {"params": params, "grid": grid.digest, "nmax": nmax, "tol": opts.tol}
    return ScanTable(rows, meta)


@dataclass
class GrossReport:
    passed: bool
    lower_margin: float  # min of E(P) - E(0)
    upper_margin: float  # min of P^2/2 - (E(P) - E(0))
    convexity_margin: float  # min second difference of P^2/2 - E(P)
    lipschitz_margin: float  # min of E(P') - E(P) + |P - P'||P|
    tol: float
    failures: list = field(default_factory=list)


def check_gross_convexity(table: ScanTable, tol: float | None = None) -> GrossReport:
    """Gross bound, convexity of P^2/2 - E(P), and the -|K||P| Lipschitz bound.

    Tolerances: 2 tol on the two-sided Gross bound and the Lipschitz bound,
    4 tol on second differences.  Rows that did not converge are skipped.
    """
    tol = table.meta.get("tol", DEFAULT_TOL) if tol is None else tol
    rows = sorted((r for r in table.rows if r.converged), key=lambda r: r.P)
    if len(rows) < 3:
        raise ValueError("need at least 3 converged rows")
    P = np.array([r.P for r in rows])
    E = np.array([r.E for r in rows])
    failures = []

    zero = np.flatnonzero(P == 0.0)
    if len(zero):
        dE = E - E[zero[0]]
        others = P != 0.0
        lower = float(dE[others].min())
        upper = float(np.min(0.5 * P[others] ** 2 - dE[others]))
        for i in range(len(P)):
            if dE[i] < -2 * tol:
                failures.append(f"Gross lower bound: E({P[i]:g}) - E(0) = {dE[i]:.3e}")
            if dE[i] > 0.5 * P[i] ** 2 + 2 * tol:
                failures.append(f"Gross upper bound: E({P[i]:g}) - E(0) = {dE[i]:.3e} > P^2/2")
    else:
        lower = upper = math.nan

    f = 0.5 * P**2 - E
    conv = []
    for i in range(1, len(P) - 1):
        h1, h2 = P[i] - P[i - 1], P[i + 1] - P[i]
        # divided-difference form; equals f[i-1] - 2 f[i] + f[i+1] on a uniform grid
        d2 = 2.0 * (h2 * f[i - 1] + h1 * f[i + 1] - (h1 + h2) * f[i]) / (h1 + h2)
        conv.append(d2)
        if d2 < -4 * tol:
            failures.append(f"convexity: second difference {d2:.3e} at P = {P[i]:g}")
    convexity = float(min(conv))

    lip = math.inf
    for i in range(len(P)):
        for j in range(len(P)):
            if i == j:
                continue
            # K = P_i - P_j, so E(P_i - K) - E(P_i) = E_j - E_i
            margin = E[j] - E[i] + abs(P[i] - P[j]) * abs(P[i])
            lip = min(lip, margin)
            if margin < -2 * tol:
                failures.append(f"Lipschitz: E({P[j]:g}) - E({P[i]:g}) = {E[j] - E[i]:.3e} < -|K||P|")
    return GrossReport(not failures, lower, upper, convexity, float(lip), tol, failures)


def default_samples(grid: Grid) -> np.ndarray:
    """Threshold sample set: modes with |k_j| <= kmax / 2."""
    return np.flatnonzero(grid.kabs <= 0.5 * grid.spec.kmax + 1e-12)


@dataclass
class GapReport:
    P: tuple
    energy: float
    threshold: float
    gap: float
    kappa: float
    samples: np.ndarray
    argmin: int
    tol: float
    passed: bool
    solves: int = 0
    converged: bool = True


def hvz_gap(
    grid: Grid,
    params: ModelParams,
    P,
    nmax: int,
    opts: SolverOptions = SolverOptions(),
    basis: FockBasis | None = None,
    samples=None,
) -> GapReport:
    """One-phonon threshold min_j [E(P - k_j) + omega(k_j) + kappa] against E(P).

    Both energies come from the same grid and basis.  omega here is the
    kappa = 0 dispersion; the phonon mass enters once, explicitly.
    """
    if not params.kappa > 0:
        raise ValueError("hvz_gap needs kappa > 0")
    Pv = _pvec(P)
    if np.linalg.norm(Pv) > params.c * (1 + 1e-12):
        raise ValueError("hvz_gap needs |P| <= c")
    samples = default_samples(grid) if samples is None else np.asarray(samples, dtype=int)
    if len(samples) == 0:
        raise ValueError("empty threshold sample set")
    basis = basis or enumerate_basis(grid.M, nmax)
    cache = _EnergyCache(grid, basis, params, opts)
    E = cache.energy(Pv)
    om0 = dispersion(grid.k, params.replace(kappa=0.0))
    thr = np.array([cache.energy(Pv - grid.k[j]) + om0[j] + params.kappa for j in samples])
    i = int(np.argmin(thr))
    gap = float(thr[i] - E)
    return GapReport(tuple(Pv), E, float(thr[i]), gap, params.kappa, samples, int(samples[i]), opts.tol,
                     gap >= params.kappa - 4 * opts.tol, cache.solves, cache.all_converged)


@dataclass
class EnvelopeReport:
    rho: np.ndarray  # ||a_j psi|| / sqrt(w_j)
    ratio: np.ndarray  # rho_j * max(sqrt|k_j|, |k_j|^2)
    r: float
    bound_linear: np.ndarray  # v / ((c - |P|)|k|)
    bound_quadratic: np.ndarray  # 2 v / (xi |k|^2), nan where it does not apply
    worst_linear: float  # max rho / bound over coupled modes
    worst_quadratic: float
    slack: float
    passed: bool
    violations: list = field(default_factory=list)


def pullthrough_envelope(
    gs: GroundStateResult,
    grid: Grid,
    basis: FockBasis,
    params: ModelParams,
    P=None,
    slack: float = 0.25,
    atol: float = 1e-8,
) -> EnvelopeReport:
    """Per-mode phonon amplitudes against the resolvent bounds of the pull-through formula.

    ``slack`` absorbs the Fock truncation (the identity a_k psi = -v R psi
    is exact only without a phonon cap); ``atol`` absorbs solver noise on
    modes that do not couple at all.
    """
    Pv = params.P_vec if P is None else _pvec(P)
    Pn = float(np.linalg.norm(Pv))
    if Pn >= params.c:
        raise ValueError("pull-through bounds need |P| < c")
    kk = grid.kabs
    rho = np.sqrt(mode_occupations(gs.vector, basis) / grid.w)
    ratio = rho * np.maximum(np.sqrt(kk), kk**2)
    v = form_factor(grid.k, params)
    with np.errstate(divide="ignore", invalid="ignore"):
        b1 = np.where(kk > 0, v / ((params.c - Pn) * kk), np.inf)
        far = kk > 2.0 * Pn / params.xi
        b2 = np.where(far & (kk > 0), 2.0 * v / (params.xi * kk**2), np.nan)
        q1 = np.where(v > 0, rho / b1, 0.0)
        q2 = np.where((v > 0) & far, rho / b2, 0.0)
    violations = []
    for j in np.flatnonzero(rho > b1 * (1 + slack) + atol):
        violations.append(f"mode {j}: rho = {rho[j]:.3e} > (1+slack) v/((c-|P|)|k|) = {b1[j] * (1 + slack):.3e}")
    for j in np.flatnonzero(far & (rho > np.nan_to_num(b2, nan=np.inf) * (1 + slack) + atol)):
        violations.append(f"mode {j}: rho = {rho[j]:.3e} > (1+slack) 2v/(xi|k|^2) = {b2[j] * (1 + slack):.3e}")
    return EnvelopeReport(rho, ratio, float(ratio.max()), b1, b2, float(np.max(q1)), float(np.max(q2, initial=0.0)),
                          slack, not violations, violations)


def neighbor_pairs(grid: Grid) -> list:
    """Ordered pairs (j, j') of face-adjacent cartesian modes with |k_j' - k_j| <= |k_j|/2.

    Pairs straddling the cutoff sphere are skipped: v jumps there, so no
    gradient bound applies across it.
    """
    if grid.spec.kind != CARTESIAN:
        raise ValueError("neighbor structure needs a cartesian grid")
    n, h = grid.spec.n, 2.0 * grid.spec.kmax / grid.spec.n
    lattice = np.rint(grid.k / h + 0.5 * (n - 1)).astype(int)
    where = {tuple(x): j for j, x in enumerate(lattice)}
    inside = grid.kabs < grid.params.cutoff
    pairs = []
    for j, x in enumerate(lattice):
        for ax in range(3):
            for s in (-1, 1):
                y = x.copy()
                y[ax] += s
                jp = where.get(tuple(y))
                if jp is not None and h <= 0.5 * grid.kabs[j] + 1e-12 and inside[j] == inside[jp]:
                    pairs.append((j, jp))
    return pairs


@dataclass
class EquicontinuityReport:
    r_prime: float
    pairs: int
    worst_pair: tuple | None


def equicontinuity_check(gs: GroundStateResult, grid: Grid, basis: FockBasis, params: ModelParams = None, P=None) -> EquicontinuityReport:
    """max over neighbor pairs of ||a_j' psi - a_j psi|| / sqrt(w) * |k_j|^2 / |k_j' - k_j|."""
    pairs = neighbor_pairs(grid)
    if not pairs:
        return EquicontinuityReport(0.0, 0, None)
    A = annihilation_matrix(gs.vector, basis)
    j, jp = np.array(pairs).T
    D = (A[:, jp] - A[:, j]).tocsc()
    norms = np.sqrt(np.asarray(D.multiply(D).sum(axis=0)).ravel())
    step = np.linalg.norm(grid.k[jp] - grid.k[j], axis=1)
    vals = norms / np.sqrt(grid.w[j]) * grid.kabs[j] ** 2 / step
    i = int(np.argmax(vals))
    return EquicontinuityReport(float(vals[i]), len(pairs), (int(j[i]), int(jp[i])))


def discrete_sigma1(grid: Grid, params: ModelParams) -> float:
    """-sum_j g_j^2 / (k_j^2/2 + omega_kappa(k_j)): the mode-sum counterterm."""
    gj = mode_couplings(grid, params)
    den = 0.5 * grid.kabs**2 + dispersion(grid.k, params)
    active = gj != 0.0
    return float(-np.sum(gj[active] ** 2 / den[active]))


def richardson_extrapolate(x, y, x0: float = 0.0):
    """Neville table extrapolating y(x) to x0; returns (estimate, error estimate)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    if n < 2:
        raise ValueError("need at least two points")
    T = [list(y)]
    for m in range(1, n):
        prev = T[-1]
        T.append([((x0 - x[i + m]) * prev[i] - (x0 - x[i]) * prev[i + 1]) / (x[i] - x[i + m]) for i in range(n - m)])
    best = T[-1][0]
    err = abs(best - T[-2][-1]) if n > 1 else math.inf
    return float(best), float(err)


@dataclass
class RegularizationScan:
    kind: str
    columns: tuple
    rows: list
    converged: list
    summary: dict = field(default_factory=dict)


def scan_regularization(
    kind: str,
    spec: GridSpec,
    params: ModelParams,
    schedule,
    nmax: int,
    opts: SolverOptions = SolverOptions(),
    sigma2_rtol: float = 1e-4,
    threads: int = 1,
) -> RegularizationScan:
    """Ground energies along a cutoff (``uv``) or phonon-mass (``ir``) schedule."""
    schedule = [float(x) for x in schedule]
    if kind == "uv":
        if any(b <= a for a, b in zip(schedule, schedule[1:])):
            raise ValueError("uv schedule must be ascending")
        if spec.kmax < schedule[-1]:
            raise ValueError("uv scan needs kmax >= largest cutoff")
        base = build_grid(spec, params)
        basis = enumerate_basis(base.M, nmax)

        def one(L):
            p = params.replace(cutoff=L)
            gs = solve(base, basis, p, opts)
            s1 = discrete_sigma1(base, p)
            s2 = renorm.sigma2(p, L, rtol=sigma2_rtol).value
            return (L, gs.energy, gs.energy - s1, gs.energy - s1 - s2, gs.residual), gs.converged

        out = _map(one, schedule, threads)
        rows = [r for r, _ in out]
        conv = [c for _, c in out]
        E = np.array([r[1] for r in rows])
        sub = np.array([r[2] for r in rows])
        drift = np.diff(E)
        sub_drift = np.diff(sub)
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(drift != 0, np.abs(sub_drift) / np.abs(drift), 0.0)
        summary = {"subtracted_drift_fraction": frac.tolist()}
        return RegularizationScan("uv", ("Lambda", "E", "E_minus_sigma1", "E_minus_sigma12", "residual"), rows, conv, summary)

    if kind == "ir":
        if any(b >= a for a, b in zip(schedule, schedule[1:])):
            raise ValueError("ir schedule must be descending")
        if min(schedule) <= 0:
            raise ValueError("ir schedule needs kappa > 0")
        grid = build_grid(spec, params)
        basis = enumerate_basis(grid.M, nmax)

        def one(kap):
            gs = solve(grid, basis, params.replace(kappa=kap), opts)
            obs = observables(gs, grid, basis)
            return (kap, gs.energy, obs["N_mean"], obs["Z"], gs.residual), gs.converged

        out = _map(one, schedule, threads)
        rows = [r for r, _ in out]
        conv = [c for _, c in out]
        kap = np.array([r[0] for r in rows])
        E = np.array([r[1] for r in rows])
        # kappa descends, so energies must not increase along the schedule
        monotone = bool(np.all(np.diff(E) <= 2 * opts.tol))
        steps = np.abs(np.diff(E))
        cauchy = bool(np.all(np.diff(steps) <= 2 * opts.tol)) if len(steps) > 1 else True
        tail = min(3, len(rows))
        extrap, err = richardson_extrapolate(kap[-tail:], E[-tail:]) if tail >= 2 else (math.nan, math.nan)
        summary = {"monotone": monotone, "cauchy": cauchy, "E_extrapolated": extrap, "extrapolation_error": err}
        return RegularizationScan("ir", ("kappa", "E", "N_mean", "Z", "residual"), rows, conv, summary)

    raise ValueError(f"unknown regularization kind {kind!r}")


def pstar_closed_form(grid: Grid, params: ModelParams, samples=None) -> float:
    """Decoupled (g = 0) critical momentum along +z: min_j (k_j^2/2 + omega_kappa(k_j)) / k_j,z."""
    samples = default_samples(grid) if samples is None else np.asarray(samples, dtype=int)
    k = grid.k[samples]
    up = k[:, 2] > 0
    if not np.any(up):
        return math.inf
    k = k[up]
    return float(np.min((0.5 * np.sum(k * k, axis=1) + dispersion(k, params)) / k[:, 2]))


@dataclass
class PstarReport:
    curve: list  # rows (P, E, threshold, Delta, Z)
    pstar_threshold: float | None  # None: criterion never met on the schedule
    pstar_residue: float | None
    eps_crit: float
    z_crit: float
    pstar_decoupled: float
    eps_grid: float
    c: float
    converged: bool

    @property
    def mass_threshold(self):
        return None if self.pstar_threshold is None else self.pstar_threshold / self.c

    @property
    def mass_residue(self):
        return None if self.pstar_residue is None else self.pstar_residue / self.c

    def describe(self, value):
        return f"> {self.curve[-1][0]:g}" if value is None else f"{value:.6g}"


def estimate_pstar(
    grid: Grid,
    params: ModelParams,
    P_schedule,
    nmax: int,
    opts: SolverOptions = SolverOptions(),
    eps_crit: float | None = None,
    z_crit: float = 0.1,
    samples=None,
    basis: FockBasis | None = None,
) -> PstarReport:
    """Scan the one-phonon threshold margin Delta(P) and the residue Z(P).

    Delta(P) = min_j [E(P - k_j) + omega_kappa(k_j)] - E(P) on the same grid.
    The two stopping criteria are reported side by side, never merged.
    """
    P_schedule = [float(x) for x in P_schedule]
    eps_crit = 1e-3 * params.c**2 if eps_crit is None else eps_crit
    samples = default_samples(grid) if samples is None else np.asarray(samples, dtype=int)
    basis = basis or enumerate_basis(grid.M, nmax)
    cache = _EnergyCache(grid, basis, params, opts)
    om = dispersion(grid.k, params)
    curve = []
    p_thr = p_res = None
    for P in P_schedule:
        Pv = np.array([0.0, 0.0, P])
        gs = solve(grid, basis, params.replace(P=tuple(Pv)), opts)
        cache.all_converged &= gs.converged
        E = gs.energy
        thr = min(cache.energy(Pv - grid.k[j]) + om[j] for j in samples)
        Z = float(gs.vector[0] ** 2)
        delta = thr - E
        curve.append((P, E, thr, delta, Z))
        if p_thr is None and delta <= eps_crit:
            p_thr = P
        if p_res is None and Z < z_crit:
            p_res = P
    decoupled = pstar_closed_form(grid, params, samples)
    return PstarReport(curve, p_thr, p_res, eps_crit, z_crit, decoupled, abs(decoupled - params.c), params.c,
                       cache.all_converged)
