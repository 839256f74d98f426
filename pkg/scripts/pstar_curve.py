"""Threshold margin Delta(P) and residue Z(P) across P = c, written as plot data."""

import argparse

import numpy as np

from polaronlab import diagnostics as diag
from polaronlab.cli import emit_plotdata
from polaronlab.grid import CARTESIAN, GridSpec, build_grid
from polaronlab.model import ModelParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=5)
    ap.add_argument("--kmax", type=float, default=1.0)
    ap.add_argument("--couplings", type=float, nargs="+", default=[0.0, 0.1, 0.3])
    ap.add_argument("--pmax", type=float, default=1.6)
    ap.add_argument("--step", type=float, default=0.1)
    ap.add_argument("--nmax", type=int, default=2)
    ap.add_argument("--out", default="pstar")
    args = ap.parse_args()

    P = np.round(np.arange(0.0, args.pmax + 1e-9, args.step), 10)
    for g in args.couplings:
        p = ModelParams(g=g, kappa=0.0)
        grid = build_grid(GridSpec(CARTESIAN, args.kmax, args.n), p)
        rep = diag.estimate_pstar(grid, p, P, args.nmax, diag.SolverOptions(tol=1e-9))
        path = emit_plotdata((("P", "E", "threshold", "Delta", "Z"), rep.curve), f"{args.out}-g{g:g}.dat")
        print(f"g = {g:g}: P_* {rep.describe(rep.pstar_threshold)} (threshold), {rep.describe(rep.pstar_residue)} "
              f"(residue), decoupled {rep.pstar_decoupled:.4f}, eps_grid {rep.eps_grid:.4f} -> {path}")


if __name__ == "__main__":
    main()
