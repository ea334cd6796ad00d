"""Per-round regret of the robust learner as the misspecification level grows.

For each epsilon the standard benchmark gets a residual of that size; the
script prints regret / T next to the floor 2 eps sqrt(d).

    python3 scripts/misspecification.py --T 8192 --eps 0,0.05,0.1,0.2
"""

import argparse
import math

from linexp3.cli import run_experiment
from linexp3.config import ExperimentConfig


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--T", type=int, default=8192)
    p.add_argument("--eps", default="0,0.05,0.1,0.2")
    p.add_argument("--reps", type=int, default=16)
    p.add_argument("--seed", type=int, default=8)
    p.add_argument("--algorithm", default="robust_linexp3")
    args = p.parse_args(argv)

    d = 4
    print("epsilon,regret_per_round,stderr,floor")
    for eps in (float(e) for e in args.eps.split(",")):
        cfg = ExperimentConfig(algorithm=args.algorithm, K=4, d=d, T=args.T, seed=args.seed,
                               replications=args.reps, environment={"kind": "benchmark", "name": "standard"},
                               adversary={"epsilon": eps}, evaluation="exact")
        curve = run_experiment(cfg).curve
        print(f"{eps:g},{curve.final / args.T:.5f},{curve.final_stderr / args.T:.5f},{2 * eps * math.sqrt(d):.4f}")


if __name__ == "__main__":
    main()
