"""Envelope r and equicontinuity r' under grid refinement at fixed cutoff."""

import argparse

from polaronlab import diagnostics as diag
from polaronlab.fock import enumerate_basis
from polaronlab.grid import CARTESIAN, GridSpec, build_grid
from polaronlab.model import ModelParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[4, 5, 6, 7, 8])
    ap.add_argument("--kmax", type=float, default=2.0)
    ap.add_argument("--cutoff", type=float, default=2.0)
    ap.add_argument("--g", type=float, default=0.2)
    ap.add_argument("--kappa", type=float, default=0.1)
    ap.add_argument("--P", type=float, default=0.5)
    ap.add_argument("--nmax", type=int, default=2)
    args = ap.parse_args()

    p = ModelParams(g=args.g, kappa=args.kappa, cutoff=args.cutoff, P=(0.0, 0.0, args.P))
    print(f"{'n':>3} {'modes':>6} {'r':>9} {'lin':>6} {'quad':>6} {'r_prime':>9} {'pairs':>6}")
    for n in args.sizes:
        grid = build_grid(GridSpec(CARTESIAN, args.kmax, n), p)
        basis = enumerate_basis(grid.M, args.nmax)
        gs = diag.solve(grid, basis, p, diag.SolverOptions(tol=1e-10))
        env = diag.pullthrough_envelope(gs, grid, basis, p)
        eq = diag.equicontinuity_check(gs, grid, basis, p)
        print(f"{n:>3} {grid.M:>6} {env.r:>9.5f} {env.worst_linear:>6.3f} {env.worst_quadratic:>6.3f} "
              f"{eq.r_prime:>9.5f} {eq.pairs:>6}")


if __name__ == "__main__":
    main()
