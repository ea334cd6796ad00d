"""Aggregation of episodes into expected-regret curves, and log-log slope fits."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..environment import Environment
from ..errors import MismatchedConfigs, NonPositiveValue
from .episode import LearnerConfig, RunRecord, config_hash, run_episode


def regret_grid(T: int) -> np.ndarray:
    """Powers of two up to ``T``, plus ``T`` itself."""
    grid = [1 << k for k in range(T.bit_length()) if (1 << k) <= T]
    if grid[-1] != T:
        grid.append(T)
    return np.array(grid, dtype=np.int64)


@dataclass
class RegretCurve:
    grid: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    replications: int
    mean_learner_loss: np.ndarray
    mean_comparator_loss: np.ndarray

    @property
    def final(self) -> float:
        return float(self.mean[-1])

    @property
    def final_stderr(self) -> float:
        return float(self.stderr[-1])

    def rows(self):
        for i in range(len(self.grid)):
            yield (int(self.grid[i]), float(self.mean[i]), float(self.stderr[i]),
                   float(self.mean_learner_loss[i]), float(self.mean_comparator_loss[i]))


def _curve(learner: np.ndarray, comparator: np.ndarray, T: int) -> RegretCurve:
    """``learner``/``comparator``: (replications, T) per-round losses."""
    grid = regret_grid(T)
    cl = np.cumsum(learner, axis=1)[:, grid - 1]
    cc = np.cumsum(comparator, axis=1)[:, grid - 1]
    reg = cl - cc
    n = reg.shape[0]
    stderr = reg.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(len(grid))
    return RegretCurve(grid, reg.mean(axis=0), stderr, n, cl.mean(axis=0), cc.mean(axis=0))


def _check_same(records: Sequence[RunRecord]) -> int:
    if not records:
        raise ValueError("no records")
    hashes = {r.config_hash for r in records}
    lengths = {r.T for r in records}
    if len(hashes) > 1 or len(lengths) > 1:
        raise MismatchedConfigs(f"records come from {len(hashes)} configs / {len(lengths)} horizons")
    return lengths.pop()


def expected_regret(records: Sequence[RunRecord]) -> RegretCurve:
    """Mean cumulative realized regret over replications, with standard errors."""
    T = _check_same(records)
    return _curve(np.stack([r.learner_loss for r in records]),
                  np.stack([r.comparator_loss for r in records]), T)


def exact_curve(records: Sequence[RunRecord]) -> RegretCurve:
    """Like :func:`expected_regret` but using the per-round context-exact losses."""
    T = _check_same(records)
    if any(r.exact_learner_loss is None for r in records):
        raise ValueError("records were not produced with exact=True")
    return _curve(np.stack([r.exact_learner_loss for r in records]),
                  np.stack([r.exact_comparator_loss for r in records]), T)


def run_replications(env: Environment, cfg: LearnerConfig, T: int, seed: int, replications: int,
                     threads: Optional[int] = None, exact: bool = False) -> list[RunRecord]:
    """Independent episodes, one per replication index; results do not depend on ``threads``."""
    cid = config_hash(env, cfg, T)
    threads = threads or os.cpu_count() or 1

    def one(r):
        return run_episode(env, cfg, T, seed=seed, replication=r, exact=exact, config_id=cid)

    if threads == 1 or replications == 1:
        return [one(r) for r in range(replications)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(replications)))


def expected_regret_exact(env: Environment, cfg: LearnerConfig, T: int, replications: int, seed: int = 0,
                          threads: Optional[int] = None) -> RegretCurve:
    """Regret averaged exactly over the context law at each round, and over learner randomness by replication."""
    return exact_curve(run_replications(env, cfg, T, seed, replications, threads, exact=True))


def slope_fit(points) -> float:
    """Least-squares slope of log(regret) against log(T)."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValueError("need at least two (T, regret) points")
    if np.any(pts <= 0):
        raise NonPositiveValue("slope fit needs positive T and regret values")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    lx = lx - lx.mean()
    return float(lx @ (ly - ly.mean()) / (lx @ lx))
