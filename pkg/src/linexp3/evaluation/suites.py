"""Verification suites shared by the command line and the acceptance tests.

Each suite returns a list of :class:`Check` records: a named comparison of a
measured value against a bound, with the margin kept for reporting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .. import streams
from ..environment import ConstantAdversary, Environment, FiniteSupport, make_misspec, random_piecewise, \
    random_sphere_support, random_unit_rows, scale_to_bound
from ..errors import UnknownSuite
from ..learner import RealMGR, tune_real, tune_robust
from ..mgr import MgrConfig, ResamplingOracle, ScriptedOracle, expected_sigma_plus, mgr_fast, mgr_naive
from .episode import LearnerConfig, run_episode
from .verify import (GhostSampler, enumerate_mgr_expectation, real_truncation_report, robust_mean_estimate_exact,
                     verify_bias_and_quadratic, verify_potential_inequality)


@dataclass
class Check:
    name: str
    value: float
    bound: float
    ok: bool
    detail: str = ""

    @property
    def margin(self) -> float:
        return self.bound - self.value

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        extra = f" [{self.detail}]" if self.detail else ""
        return f"{status} {self.name}: {self.value:.6g} vs {self.bound:.6g} (margin {self.margin:.4g}){extra}"


def _rng(seed: int, *key: int) -> np.random.Generator:
    return streams.stream(seed, streams.SCRIPT, *key)


def random_finite_env(rng: np.random.Generator, K: int, d: int, T: int, epsilon: float = 0.0,
                      n_points: int = 6, linear_twin: bool = False):
    """Random sphere support and constant parameters; optionally the same instance without residuals."""
    dist = random_sphere_support(d, n_points, rng)
    misspec = make_misspec("sign_bump", epsilon, K, d, rng)
    theta = scale_to_bound(random_unit_rows(rng, K, d), dist.sigma, epsilon)
    env = Environment.build(dist, ConstantAdversary(theta, T, misspec))
    if linear_twin:
        return env, Environment.build(dist, ConstantAdversary(theta, T, None))
    return env


def frozen_robust_state(env: Environment, rounds: int, seed: int):
    """Learner state after ``rounds`` rounds of the tuned robust learner."""
    b = env.bounds
    tp = tune_robust(env.T, env.K, env.d, b.sigma, b.lambda_min)
    rec = run_episode(env, LearnerConfig("robust_linexp3", tp.eta, tp.gamma), rounds, seed=seed)
    return rec.extras["final_state"]


# ---------------------------------------------------------------------------
# estimators: unbiasedness on linear losses
# ---------------------------------------------------------------------------

def suite_estimators(seed: int = 0, K: int = 3, d: int = 3, instances: int = 5, tol: float = 1e-10) -> list[Check]:
    checks = []
    for i in range(instances):
        rng = _rng(seed, 1, i)
        env = random_finite_env(rng, K, d, T=64)
        state = frozen_robust_state(env, 16, seed + i)
        t = state.round
        mean = robust_mean_estimate_exact(env, state, t, env.bounds.SigmaInv)
        err = float(np.max(np.abs(mean - env.adversary.theta(t))))
        checks.append(Check(f"robust unbiased (instance {i}, K={K}, d={d})", err, tol, err <= tol))
    return checks


# ---------------------------------------------------------------------------
# MGR: enumeration, Monte Carlo and fast/naive agreement
# ---------------------------------------------------------------------------

def suite_mgr(seed: int = 0, mc_samples: int = 100_000, sequences: int = 1000, tol: float = 1e-10) -> list[Check]:
    checks = []
    rng = _rng(seed, 2)
    # three-point support in R^2 with two arms and a fixed policy table
    pts = np.array([[1.0, 0.0], [0.0, 1.0], [-0.6, 0.8]])
    dist = FiniteSupport(pts, np.array([0.5, 0.3, 0.2]))
    table = np.array([[0.3, 0.7], [0.6, 0.4], [0.5, 0.5]])
    policy = lambda X: table[[int(np.argmin(np.abs(pts - x).sum(axis=1))) for x in np.atleast_2d(X)]]
    beta = 1.0 / (2 * dist.sigma ** 2)
    for M in range(0, 5):
        cfg = MgrConfig(beta, M)
        for a in range(2):
            sig_a = (dist.probs * table[:, a]) @ np.einsum("ni,nj->nij", pts, pts).reshape(3, -1)
            exact = expected_sigma_plus(sig_a.reshape(2, 2), cfg)
            enum = enumerate_mgr_expectation(dist, table, a, cfg)
            err = float(np.max(np.abs(enum - exact)))
            checks.append(Check(f"MGR enumeration = closed form (M={M}, arm {a})", err, tol, err <= tol))
    cfg = MgrConfig(beta, 4)
    oracle = ResamplingOracle(dist, policy, _rng(seed, 2, 1))
    samples = np.stack([mgr_naive(cfg, oracle, 0) for _ in range(mc_samples)])
    sig_0 = sum(dist.probs[i] * table[i, 0] * np.outer(pts[i], pts[i]) for i in range(3))
    exact = expected_sigma_plus(sig_0, cfg)
    se = samples.std(axis=0, ddof=1) / math.sqrt(mc_samples)
    z = float(np.max(np.abs(samples.mean(axis=0) - exact) / np.where(se > 0, se, np.inf)))
    checks.append(Check(f"MGR Monte Carlo mean within 4 SE ({mc_samples} samples, M=4)", z, 4.0, z <= 4.0))
    worst = 0.0
    for _ in range(sequences):
        d = int(rng.integers(1, 9))
        M = int(rng.integers(0, 65))
        K = int(rng.integers(1, 5))
        X = rng.standard_normal((M, d))
        X /= np.maximum(np.linalg.norm(X, axis=1, keepdims=True), 1e-12)
        A = rng.integers(0, K, size=M)
        x = rng.standard_normal(d)
        a = int(rng.integers(0, K))
        c = MgrConfig(0.5, M)
        fast = mgr_fast(c, ScriptedOracle(X.reshape(M, d), A, K), a, x)
        naive = mgr_naive(c, ScriptedOracle(X.reshape(M, d), A, K), a) @ x
        worst = max(worst, float(np.max(np.abs(fast - naive))))
    checks.append(Check(f"fast MGR = naive MGR x ({sequences} scripted sequences)", worst, tol, worst <= tol))
    return checks


# ---------------------------------------------------------------------------
# auxiliary-game potential inequality
# ---------------------------------------------------------------------------

@dataclass
class PotentialSummary:
    episodes: int
    evaluated: int
    precondition_violations: int
    failures: int
    failures_tight: int
    min_margin: float
    min_margin_tight: float


def run_potential_sweep(seed: int = 0, episodes: int = 200, max_T: int = 256, contexts: int = 5):
    evaluated = violations = failures = failures_tight = 0
    min_margin = min_tight = math.inf
    for e in range(episodes):
        rng = _rng(seed, 3, e)
        K = int(rng.integers(2, 5))
        d = int(rng.integers(2, 5))
        T = int(rng.integers(16, max_T + 1))
        dist = random_sphere_support(d, 6, rng)
        adv = random_piecewise(K, d, T, 3, dist.sigma, rng)
        env = Environment.build(dist, adv)
        b = env.bounds
        if e % 2 == 0:
            tp = tune_robust(T, K, d, b.sigma, b.lambda_min)
            cfg = LearnerConfig("robust_linexp3", tp.eta, tp.gamma)
        else:
            tp = tune_real(T, K, d, b.sigma, b.R, b.lambda_min)
            cfg = LearnerConfig("real_linexp3", tp.eta, tp.gamma, tp.beta, tp.M)
        rec = run_episode(env, cfg, T, seed=seed + e, trace=True)
        idx = rng.choice(dist.size, size=min(contexts, dist.size), replace=False)
        for x in dist.points[idx]:
            rep = verify_potential_inequality(rec.estimates, x, cfg.eta, cfg.gamma)
            if rep.skipped:
                violations += 1
                continue
            evaluated += 1
            failures += not rep.holds
            failures_tight += not bool(np.all(rep.lhs <= rep.rhs_tight + 1e-9 * (1 + np.abs(rep.rhs_tight))))
            min_margin = min(min_margin, float(np.min(rep.margin)))
            min_tight = min(min_tight, float(np.min(rep.rhs_tight - rep.lhs)))
    return PotentialSummary(episodes, evaluated, violations, failures, failures_tight, min_margin, min_tight)


def suite_potential(seed: int = 0, episodes: int = 200, max_T: int = 256, contexts: int = 5) -> list[Check]:
    s = run_potential_sweep(seed, episodes, max_T, contexts)
    detail = (f"{s.evaluated} contexts evaluated, {s.precondition_violations} skipped because "
              f"|eta <x, theta_hat>| >= 1 occurred")
    return [
        Check("potential inequality failures", s.failures, 0, s.failures == 0,
              detail + f", min margin {s.min_margin:.4g}"),
        Check("potential inequality failures (tight form)", s.failures_tight, 0, s.failures_tight == 0,
              f"min margin {s.min_margin_tight:.4g}"),
    ]


# ---------------------------------------------------------------------------
# bias, truncation and quadratic-term bounds
# ---------------------------------------------------------------------------

def suite_bias(seed: int = 0, epsilons=(0.05, 0.1), dims=(2, 4, 9), K: int = 3) -> list[Check]:
    checks = []
    for eps in epsilons:
        for d in dims:
            env = random_finite_env(_rng(seed, 4, d, int(eps * 1000)), K, d, T=64, epsilon=eps, n_points=2 * d)
            state = frozen_robust_state(env, 32, seed)
            rep = verify_bias_and_quadratic(env, state, state.round)
            checks.append(Check(f"robust bias (eps={eps}, d={d})", rep.bias, rep.bias_bound, rep.bias_ok,
                                f"vs loss {rep.bias_vs_loss.max():.4g}, linear {rep.bias_linear.max():.4g}"))
    return checks


def suite_truncation(seed: int = 0, Ms=(1, 10, 100), dims=(2, 4, 9), K: int = 3) -> list[Check]:
    checks = []
    for d in dims:
        _, lin = random_finite_env(_rng(seed, 5, d), K, d, T=64, n_points=2 * d, linear_twin=True)
        state = frozen_robust_state(lin, 32, seed)
        for M in Ms:
            cfg = MgrConfig(1.0 / (2 * lin.bounds.sigma ** 2), M)
            rep = real_truncation_report(lin, replace(state, estimator=RealMGR(cfg)), state.round, cfg)
            checks.append(Check(f"MGR truncation bias (d={d}, M={M})", rep.max_bias, rep.bound, rep.ok,
                                f"op norm {rep.op_norm:.4g} <= {rep.op_norm_bound:.4g}"))
    return checks


def suite_quadratic(seed: int = 0, N: int = 100_000, dims=(2, 4, 9), real_dims=None, K: int = 3,
                    epsilon: float = 0.1) -> list[Check]:
    checks = []
    real_dims = dims if real_dims is None else real_dims
    for d in dims:
        env = random_finite_env(_rng(seed, 6, d), K, d, T=64, epsilon=epsilon, n_points=2 * d)
        state = frozen_robust_state(env, 32, seed)
        rep = verify_bias_and_quadratic(env, state, state.round)
        checks.append(Check(f"robust quadratic term (d={d}, exact)", rep.quadratic, rep.quadratic_bound,
                            rep.quadratic_ok))
        if d in real_dims:
            b = env.bounds
            tp = tune_real(env.T, K, d, b.sigma, b.R, b.lambda_min)
            cfg = MgrConfig(tp.beta, tp.M)
            real_state = replace(state, gamma=tp.gamma, eta=tp.eta, estimator=RealMGR(cfg))
            ghost = GhostSampler(env.distribution, streams.stream(seed, streams.GHOST, d))
            rep = verify_bias_and_quadratic(env, real_state, state.round, ghost, N)
            checks.append(Check(f"MGR quadratic term (d={d}, M={cfg.M}, N={N})", rep.quadratic,
                                rep.quadratic_bound + 3 * rep.quadratic_stderr, rep.quadratic_ok,
                                f"se {rep.quadratic_stderr:.3g}"))
    return checks


def suite_bounds(seed: int = 0, N: int = 100_000) -> list[Check]:
    return suite_bias(seed) + suite_truncation(seed) + suite_quadratic(seed, N)


SUITES: dict[str, Callable[..., list[Check]]] = {
    "estimators": suite_estimators,
    "mgr": suite_mgr,
    "potential": suite_potential,
    "bounds": suite_bounds,
}


def run_suite(name: str, seed: int = 0) -> list[Check]:
    if name == "all":
        return [c for fn in SUITES.values() for c in fn(seed)]
    if name not in SUITES:
        raise UnknownSuite(f"unknown suite {name!r}; choose from {sorted(SUITES) + ['all']}")
    return SUITES[name](seed)
