"""Command-line front end: ``run``, ``sweep`` and ``verify``.

Exit codes: 0 success, 1 parse or validation error, 2 runtime failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass
from typing import Optional, Sequence

from .config import ExperimentConfig, load_config
from .errors import LinExp3Error, ParseError, UnknownSuite, ValidationError
from .evaluation.regret import RegretCurve, expected_regret, exact_curve, run_replications, slope_fit
from .evaluation.suites import run_suite

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3
CSV_HEADER = "t,mean_regret,stderr,mean_learner_loss,mean_comparator_loss"
SWEEP_HEADER = "T,final_regret,stderr"
SWEEP_SEED_STRIDE = 10 ** 6


def _fmt(v) -> str:
    return f"{v:.12g}"


def curve_csv(curve: RegretCurve) -> str:
    lines = [CSV_HEADER]
    for row in curve.rows():
        lines.append(",".join([str(row[0])] + [_fmt(v) for v in row[1:]]))
    return "\n".join(lines) + "\n"


@dataclass
class RunResult:
    config: ExperimentConfig
    curve: RegretCurve
    summary: dict


def run_experiment(cfg: ExperimentConfig, threads: Optional[int] = None) -> RunResult:
    """All replications of one config, aggregated into a regret curve plus a JSON-ready summary."""
    start = time.perf_counter()
    env, lcfg, tuned = cfg.resolve()
    exact = cfg.evaluation == "exact"
    records = run_replications(env, lcfg, cfg.T, cfg.seed, cfg.replications, threads=threads, exact=exact)
    curve = exact_curve(records) if exact else expected_regret(records)
    summary = cfg.summary()
    summary.update({
        "resolved": {"eta": lcfg.eta, "gamma": lcfg.gamma, "beta": lcfg.beta, "M": lcfg.M},
        "clamped": dict(tuned.clamped),
        "warnings": list(tuned.warnings),
        "environment_constants": {"sigma": env.bounds.sigma, "R": env.bounds.R,
                                  "lambda_min": env.bounds.lambda_min, "epsilon": env.bounds.epsilon},
        "config_hash": records[0].config_hash,
        "final_regret": curve.final,
        "final_stderr": curve.final_stderr,
        "wall_time_s": time.perf_counter() - start,
    })
    return RunResult(cfg, curve, summary)


def _write(path: Optional[str], text: str, fallback) -> None:
    if path is None:
        fallback.write(text)
        return
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _summary_path(path: Optional[str]) -> Optional[str]:
    if path is None:
        return None
    root, ext = os.path.splitext(path)
    return (root if ext == ".csv" else path) + ".json"


def cmd_run(cfg: ExperimentConfig, threads: Optional[int] = None, output: Optional[str] = None,
            stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    res = run_experiment(cfg, threads)
    out = output or cfg.output
    _write(out, curve_csv(res.curve), stdout)
    _write(_summary_path(out), json.dumps(res.summary, indent=2, sort_keys=True) + "\n", stderr)
    for w in res.summary["warnings"]:
        print(f"warning: {w}", file=stderr)
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig, grid: Sequence[int], threads: Optional[int] = None,
              output: Optional[str] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    if len(grid) < 3:
        raise ValidationError("grid", "a sweep needs at least 3 horizons")
    if any(T < 1 for T in grid) or list(grid) != sorted(set(grid)):
        raise ValidationError("grid", "horizons must be positive and strictly increasing")
    rows, runs = [], []
    for idx, T in enumerate(grid):
        res = run_experiment(cfg.with_horizon(T).with_seed(cfg.seed + idx * SWEEP_SEED_STRIDE), threads)
        rows.append((T, res.curve.final, res.curve.final_stderr))
        runs.append(res.summary)
    exponent = slope_fit([(T, r) for T, r, _ in rows])
    text = SWEEP_HEADER + "\n" + "".join(f"{T},{_fmt(r)},{_fmt(s)}\n" for T, r, s in rows)
    out = output or cfg.output
    _write(out, text, stdout)
    summary = {"algorithm": cfg.algorithm, "grid": list(grid), "exponent": exponent, "runs": runs}
    _write(_summary_path(out), json.dumps(summary, indent=2, sort_keys=True) + "\n", stderr)
    print(f"fitted exponent: {exponent:.6g}", file=stderr)
    return EXIT_OK


def cmd_verify(suite: str, seed: int = 0, stdout=None) -> int:
    stdout = stdout or sys.stdout
    checks = run_suite(suite, seed)
    for c in checks:
        print(c.line(), file=stdout)
    failed = sum(not c.ok for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed", file=stdout)
    return EXIT_OK if failed == 0 else EXIT_VERIFY


def _grid(text: str) -> list[int]:
    try:
        return [int(v, 0) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; expected comma-separated integers") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="linexp3", description="Contextual adversarial bandit experiments.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: logical cores)")
    common.add_argument("--output", default=None, help="CSV path; the JSON summary goes next to it")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="run one experiment config")
    r.add_argument("config")
    s = sub.add_parser("sweep", parents=[common], help="run a config over a grid of horizons")
    s.add_argument("config")
    s.add_argument("--grid", type=_grid, required=True, help="comma-separated horizons, e.g. 1024,2048,4096")
    v = sub.add_parser("verify", parents=[common], help="numerical checks of the estimator moments and regret inequalities")
    v.add_argument("suite", help="estimators, mgr, potential, bounds or all")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        if args.command == "verify":
            return cmd_verify(args.suite, seed=args.seed or 0)
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.command == "run":
            return cmd_run(cfg, args.threads, args.output)
        return cmd_sweep(cfg, args.grid, args.threads, args.output)
    except (ParseError, ValidationError, UnknownSuite, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (LinExp3Error, ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
