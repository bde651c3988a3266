"""Mean queue lengths and loss rates against the admission probability p.

Runs at a load where lambda1 + lambda2 >= mu, outside the region where
stability is certified for p < 1.  A solve on growing caps shows whether the
boundary mass settles (suggesting stability) or keeps growing with the caps.
"""
import argparse

from prioinv import ModelParams, TruncationSpec, check_ergodicity, solve
from prioinv.cli import solver_metrics


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambda1", type=float, default=1.0)
    ap.add_argument("--lambda2", type=float, default=3.5)
    ap.add_argument("--mu", type=float, default=4.0)
    ap.add_argument("--nu", type=float, default=1.0)
    ap.add_argument("--s", type=int, default=2)
    ap.add_argument("--b", type=int, default=4)
    ap.add_argument("--grid", default="0,0.1,0.25,0.5,0.75,0.9,1")
    ap.add_argument("--caps", default="20,40,80")
    args = ap.parse_args()

    caps = [int(c) for c in args.caps.split(",")]
    print("p,certified_stable,cap,boundary_mass,E[X1],E[X2],P(Y=0)")
    for p in (float(x) for x in args.grid.split(",")):
        P = ModelParams(args.lambda1, args.lambda2, args.mu, args.nu, p, args.s, args.b)
        certified = check_ergodicity(P).stable
        for c in caps:
            d = solve(P, TruncationSpec(c, c))
            m = solver_metrics(d)
            print(f"{p},{int(certified)},{c},{d.boundary_mass():.3e},{m['E[X1]']:.5g},"
                  f"{m['E[X2]']:.5g},{m['P(Y=0)']:.5g}")


if __name__ == "__main__":
    main()
