"""kappa -> 0 extrapolation against grid size.

dE/dkappa = <N> by Hellmann-Feynman, so E(0) - E(kappa_min) is roughly
<N> kappa_min.  This prints both numbers for several grids.
"""

import argparse

import numpy as np

from polaronlab import diagnostics as diag
from polaronlab.grid import CARTESIAN, GridSpec
from polaronlab.model import ModelParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[3, 4, 5, 6])
    ap.add_argument("--kmax", type=float, default=2.0)
    ap.add_argument("--cutoff", type=float, default=2.0)
    ap.add_argument("--g", type=float, default=0.2)
    ap.add_argument("--nmax", type=int, default=2)
    ap.add_argument("--kappas", type=float, nargs="+", default=[0.2, 0.1, 0.05, 0.02, 0.01])
    args = ap.parse_args()

    print(f"{'n':>3} {'E(kmin)':>14} {'E_extrap':>14} {'|diff|':>10} {'N kmin':>10} {'N_mean':>8}")
    for n in args.sizes:
        p = ModelParams(g=args.g, kappa=args.kappas[0], cutoff=args.cutoff)
        scan = diag.scan_regularization("ir", GridSpec(CARTESIAN, args.kmax, n), p, args.kappas, args.nmax,
                                        diag.SolverOptions(tol=1e-10))
        E = np.array([r[1] for r in scan.rows])
        N = scan.rows[-1][2]
        ex = scan.summary["E_extrapolated"]
        print(f"{n:>3} {E[-1]:>14.8f} {ex:>14.8f} {abs(ex - E[-1]):>10.3e} {N * args.kappas[-1]:>10.3e} {N:>8.4f}")


if __name__ == "__main__":
    main()
