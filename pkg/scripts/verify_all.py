"""Run every numerical verification suite and print one line per check.

Exits with status 3 if any check fails.

    python3 scripts/verify_all.py --seed 0
"""

import argparse
import sys
import time

from linexp3.evaluation.suites import SUITES


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--suites", default=",".join(SUITES))
    args = p.parse_args(argv)

    failed = 0
    for name in args.suites.split(","):
        start = time.perf_counter()
        checks = SUITES[name](args.seed)
        for c in checks:
            print(c.line())
        bad = sum(not c.ok for c in checks)
        failed += bad
        print(f"[{name}] {len(checks) - bad}/{len(checks)} passed in {time.perf_counter() - start:.1f}s\n")
    return 3 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
