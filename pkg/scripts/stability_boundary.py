"""Windowed mean queue length on both sides of lambda1 + lambda2 = mu (p = 1).

Below the boundary the window means settle; above it they grow roughly
linearly in time.  Prints one row per (load, seed) with the window means.
"""
import argparse

import numpy as np

from prioinv import ModelParams, check_ergodicity, windowed_means


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mu", type=float, default=4.0)
    ap.add_argument("--loads", default="0.8,0.95,1.0,1.05,1.1", help="(lambda1+lambda2)/mu values")
    ap.add_argument("--windows", type=int, default=10)
    ap.add_argument("--window-events", type=int, default=100_000)
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()

    print("load,stable,seed,increasing_windows," + ",".join(f"w{i}" for i in range(args.windows)))
    for load in (float(x) for x in args.loads.split(",")):
        lam = load * args.mu / 2
        P = ModelParams(lam, lam, args.mu, 2.0, 1.0, 1, 2)
        stable = check_ergodicity(P).stable
        for seed in range(args.seeds):
            w = windowed_means(P, args.windows, args.window_events, seed=seed)
            inc = int(np.sum(np.diff(w) > 0))
            print(f"{load},{int(stable)},{seed},{inc}," + ",".join(f"{x:.4g}" for x in w))


if __name__ == "__main__":
    main()
