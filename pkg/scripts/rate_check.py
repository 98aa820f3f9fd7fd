"""Monte-Carlo rate check for the order-statistics barycenter.

Gaussian units with random means and unit spread, p fixed, n doubling.
Prints the risk table, the fitted slope versus n and whether the risk
bound holds within three standard errors.

    python scripts/rate_check.py [--p 10000] [--replicates 64] [--seed 0]
"""

import argparse

from otstat.experiments import RandomMeasureFamily, rate_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, default=10_000)
    ap.add_argument("--n-grid", default="8,16,32,64,128")
    ap.add_argument("--replicates", type=int, default=64)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    family = RandomMeasureFamily("gaussian", mean_range=(0.0, 4.0), std_range=(1.0, 1.0))
    n_grid = [int(v) for v in args.n_grid.split(",")]
    rep = rate_experiment(family, n_grid, [args.p], args.replicates, args.seed)
    print(f"{'n':>6} {'mean_risk':>12} {'stderr':>10} {'bound':>12}")
    for c in rep.cells:
        print(f"{c.n:>6} {c.mean_risk:>12.4e} {c.stderr:>10.2e} {c.bound:>12.4e}")
    print(f"slope vs n: {rep.slope_n:.3f}  (expected near -1)")
    print(f"bound holds within 3 SE: {rep.bound_holds(3.0)}")


if __name__ == "__main__":
    main()
