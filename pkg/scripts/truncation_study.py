"""How the phonon-number cap distorts the g^4 scaling of |E - E_pt2|.

Prints the error at each coupling and the halving ratio for several N_max.
A pure quartic law gives 16; an uncancelled g^6 term pulls it down.
"""

import argparse

from polaronlab import diagnostics as diag
from polaronlab.fock import enumerate_basis
from polaronlab.grid import CARTESIAN, GridSpec, build_grid
from polaronlab.model import ModelParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=4)
    ap.add_argument("--kmax", type=float, default=2.0)
    ap.add_argument("--cutoff", type=float, default=2.0)
    ap.add_argument("--kappa", type=float, default=0.05)
    ap.add_argument("--P", type=float, default=0.3)
    ap.add_argument("--nmax", type=int, nargs="+", default=[1, 2, 3, 4])
    ap.add_argument("--couplings", type=float, nargs="+", default=[0.2, 0.1, 0.05, 0.025])
    args = ap.parse_args()

    opts = diag.SolverOptions(tol=1e-13)
    print(f"{'N_max':>5} {'g':>7} {'E':>20} {'E - E_pt2':>12} {'ratio':>7}")
    for nmax in args.nmax:
        prev = None
        for g in args.couplings:
            p = ModelParams(g=g, kappa=args.kappa, cutoff=args.cutoff, P=(0.0, 0.0, args.P))
            grid = build_grid(GridSpec(CARTESIAN, args.kmax, args.n), p)
            gs = diag.solve(grid, enumerate_basis(grid.M, nmax), p, opts)
            err = gs.energy - diag.pt2_energy(grid, p)
            ratio = "" if prev is None else f"{abs(prev / err):7.2f}"
            print(f"{nmax:>5} {g:>7.4f} {gs.energy:>20.14f} {err:>12.4e} {ratio:>7}")
            prev = err


if __name__ == "__main__":
    main()
