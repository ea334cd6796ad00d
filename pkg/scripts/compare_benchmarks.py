"""Final exact regret of every algorithm on every benchmark at one horizon.

    python3 scripts/compare_benchmarks.py --T 4096 --reps 8
"""

import argparse

from linexp3.benchmarks import BENCHMARKS
from linexp3.cli import run_experiment
from linexp3.config import ExperimentConfig
from linexp3.evaluation import ALGORITHMS


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--T", type=int, default=4096)
    p.add_argument("--reps", type=int, default=8)
    p.add_argument("--seed", type=int, default=11)
    p.add_argument("--algorithms", default=",".join(ALGORITHMS))
    args = p.parse_args(argv)

    algs = args.algorithms.split(",")
    print("benchmark".ljust(12) + "".join(a.rjust(18) for a in algs))
    for name in sorted(BENCHMARKS):
        cells = []
        for alg in algs:
            cfg = ExperimentConfig(algorithm=alg, K=4, d=4, T=args.T, seed=args.seed, replications=args.reps,
                                   environment={"kind": "benchmark", "name": name}, evaluation="exact")
            curve = run_experiment(cfg).curve
            cells.append(f"{curve.final:9.1f} ({curve.final_stderr:5.1f})")
        print(name.ljust(12) + "".join(c.rjust(18) for c in cells))


if __name__ == "__main__":
    main()
