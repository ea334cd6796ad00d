"""Numerical checks of the moment bounds and inequalities behind the regret guarantees.

Finite-support environments allow exact enumeration over the context law and
the learner's action choice; everything else falls back to Monte Carlo with a
dedicated ghost-sample stream.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..environment import ContextDistribution, Environment, FiniteSupport
from ..learner import (FullInfo, LearnerState, RealMGR, Robust, mixed_softmax, policy_probs)
from ..mgr import (MgrConfig, ResamplingOracle, ScriptedOracle, action_covariance_exact,
                   expected_sigma_plus, mgr_fast_batch, mgr_naive)
from ..numkit import matrix_power_apply, operator_norm


@dataclass
class GhostSampler:
    """Contexts drawn independently of every episode stream."""

    distribution: ContextDistribution
    rng: np.random.Generator

    def sample(self, m: int) -> np.ndarray:
        return self.distribution.sample_batch(self.rng, m)


# ---------------------------------------------------------------------------
# auxiliary-game potential inequality
# ---------------------------------------------------------------------------

@dataclass
class PotentialReport:
    x: np.ndarray
    precondition_held: bool
    max_eta_score: float
    lhs: np.ndarray
    rhs: np.ndarray
    rhs_tight: np.ndarray

    @property
    def margin(self) -> np.ndarray:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return bool(np.all(self.lhs <= self.rhs + 1e-9 * (1 + np.abs(self.rhs))))

    @property
    def skipped(self) -> bool:
        return not self.precondition_held


def auxiliary_game(estimates: np.ndarray, x: np.ndarray, eta: float, gamma: float):
    """Per-round estimated losses <x, theta_hat_{t,a}> and the policy played at ``x``.

    Returns (scores, probs), both of shape (T, K).
    """
    scores = np.einsum("tkd,d->tk", estimates, np.asarray(x, dtype=float))
    cum_prev = np.concatenate([np.zeros((1, scores.shape[1])), np.cumsum(scores, axis=0)[:-1]])
    return scores, mixed_softmax(-eta * cum_prev, gamma)


def verify_potential_inequality(estimates: np.ndarray, x: np.ndarray, eta: float, gamma: float) -> PotentialReport:
    """Evaluate both sides of the auxiliary-game regret bound at context ``x`` for every comparator arm.

    ``lhs[c] = sum_t sum_a pi_t(a|x) s_{t,a} - sum_t s_{t,c}`` and
    ``rhs[c] = log K / eta + 2 gamma U_c + eta sum_t sum_a pi_t(a|x) s_{t,a}^2``
    with ``s_{t,a} = <x, theta_hat_{t,a}>`` and
    ``U_c = sum_t (mean_a s_{t,a} - s_{t,c})``. ``rhs_tight`` replaces the
    first two terms by ``(1 - gamma) log K / eta + gamma U_c``, which is what
    the exponential-weights potential argument yields directly.
    """
    scores, probs = auxiliary_game(estimates, x, eta, gamma)
    K = scores.shape[1]
    played = np.sum(probs * scores)
    lhs = played - scores.sum(axis=0)
    U = scores.mean(axis=1).sum() - scores.sum(axis=0)
    quad = eta * np.sum(probs * scores ** 2)
    rhs = math.log(K) / eta + 2 * gamma * U + quad
    rhs_tight = (1 - gamma) * math.log(K) / eta + gamma * U + quad
    m = float(np.max(np.abs(eta * scores))) if scores.size else 0.0
    return PotentialReport(np.asarray(x), m < 1.0, m, lhs, rhs, rhs_tight)


# ---------------------------------------------------------------------------
# exact moments of the loss estimators on finite supports
# ---------------------------------------------------------------------------

@dataclass
class BiasQuadReport:
    estimator: str
    epsilon: float
    d: int
    K: int
    gamma: float
    bias_vs_loss: np.ndarray           # |E <X0, theta_hat_a> - E l(X0, a)| per arm
    bias_linear: np.ndarray            # |E <X0, theta_hat_a - theta_a>| per arm
    quadratic: float
    quadratic_stderr: float = 0.0
    quadratic_bound: float = float("nan")
    bias_bound: float = float("nan")
    extras: dict = field(default_factory=dict)

    @property
    def bias(self) -> float:
        return float(max(self.bias_vs_loss.max(), self.bias_linear.max()))

    @property
    def bias_ok(self) -> bool:
        return self.bias <= self.bias_bound + 1e-12

    @property
    def quadratic_ok(self) -> bool:
        return self.quadratic <= self.quadratic_bound + 3 * self.quadratic_stderr

    def lines(self):
        yield (f"{self.estimator}: bias {self.bias:.6g} <= {self.bias_bound:.6g} "
               f"(margin {self.bias_bound - self.bias:.4g})")
        yield (f"{self.estimator}: quadratic {self.quadratic:.6g} (se {self.quadratic_stderr:.3g}) "
               f"<= {self.quadratic_bound:.6g} (margin {self.quadratic_bound - self.quadratic:.4g})")


def _require_finite(env: Environment) -> FiniteSupport:
    if not isinstance(env.distribution, FiniteSupport):
        raise ValueError("exact enumeration needs a finite-support context distribution")
    return env.distribution


def robust_mean_estimate_exact(env: Environment, state: LearnerState, t: int, sigma_inv) -> np.ndarray:
    """E_t[theta_hat_{t,a}] for every arm by enumerating (X_t, A_t) over support x arms."""
    dist = _require_finite(env)
    K, d = env.K, env.d
    probs = policy_probs(state, dist.points)
    losses = env.adversary.losses(t, dist.points)
    mean = np.zeros((K, d))
    for px, x, pi, lx in zip(dist.probs, dist.points, probs, losses):
        sx = sigma_inv @ x
        for b in range(K):
            # action b observed with probability pi[b]; only arm b gets a nonzero estimate
            mean[b] += px * pi[b] * (lx[b] / pi[b]) * sx
    return mean


def robust_quadratic_exact(env: Environment, state: LearnerState, t: int, sigma_inv) -> float:
    """E_t[sum_a pi_t(a|X0) <X0, theta_hat_{t,a}>^2], enumerating X0, X_t and A_t."""
    dist = _require_finite(env)
    probs = policy_probs(state, dist.points)
    losses = env.adversary.losses(t, dist.points)
    gram = dist.points @ sigma_inv @ dist.points.T            # [x0, xt] -> x0^T S^-1 xt
    total = 0.0
    for j, (pt, pit, lt) in enumerate(zip(dist.probs, probs, losses)):
        for b in range(env.K):
            est_sq = (lt[b] / pit[b]) ** 2 * gram[:, j] ** 2  # <x0, theta_hat_b>^2 for each x0
            total += pt * pit[b] * np.sum(dist.probs * probs[:, b] * est_sq)
    return float(total)


def robust_bias_report(env: Environment, state: LearnerState, t: int) -> BiasQuadReport:
    dist = _require_finite(env)
    sigma_inv = env.bounds.SigmaInv
    mean = robust_mean_estimate_exact(env, state, t, sigma_inv)
    theta = env.adversary.theta(t)
    mu = dist.probs @ dist.points
    exp_loss = dist.probs @ env.adversary.losses(t, dist.points)
    rep = BiasQuadReport(
        estimator="robust", epsilon=env.adversary.epsilon, d=env.d, K=env.K, gamma=state.gamma,
        bias_vs_loss=np.abs(mean @ mu - exp_loss),
        bias_linear=np.abs((mean - theta) @ mu),
        quadratic=robust_quadratic_exact(env, state, t, sigma_inv),
        quadratic_bound=env.K * env.d / state.gamma,
        bias_bound=env.adversary.epsilon * math.sqrt(env.d))
    rep.extras["mean_estimate"] = mean
    rep.extras["theta"] = theta
    # |<x', theta_hat>| over all support pairs, against K sigma^2 / (gamma lambda_min)
    probs = policy_probs(state, dist.points)
    losses = env.adversary.losses(t, dist.points)
    gram = np.abs(dist.points @ sigma_inv @ dist.points.T)
    worst = np.max(gram[:, :, None] * np.abs(losses)[None] / probs[None])
    rep.extras["max_score"] = float(worst)
    rep.extras["score_bound"] = env.K * env.bounds.sigma ** 2 / (state.gamma * env.bounds.lambda_min)
    return rep


def real_mean_estimate_exact(env: Environment, state: LearnerState, t: int, cfg: MgrConfig) -> np.ndarray:
    """E_t[theta_tilde_{t,a}] = E[S+_a] E[1{A=a} X l(X, a)], enumerated over the finite support."""
    dist = _require_finite(env)
    probs = policy_probs(state, dist.points)
    losses = env.adversary.losses(t, dist.points)
    pol = lambda X: policy_probs(state, X)
    out = np.zeros((env.K, env.d))
    for a in range(env.K):
        moment = np.sum((dist.probs * probs[:, a] * losses[:, a])[:, None] * dist.points, axis=0)
        out[a] = expected_sigma_plus(action_covariance_exact(dist, pol, a), cfg) @ moment
    return out


def real_bias_identity(env: Environment, state: LearnerState, t: int, cfg: MgrConfig) -> np.ndarray:
    """(I - (I - beta Sigma_a)^{M+1}) theta_a for every arm."""
    dist = _require_finite(env)
    pol = lambda X: policy_probs(state, X)
    theta = env.adversary.theta(t)
    out = np.zeros_like(theta)
    for a in range(env.K):
        step = np.eye(env.d) - cfg.beta * action_covariance_exact(dist, pol, a)
        out[a] = theta[a] - matrix_power_apply(step, cfg.M + 1, theta[a])
    return out


@dataclass
class TruncationReport:
    M: int
    max_bias: float
    bound: float
    op_norm: float
    op_norm_bound: float

    @property
    def ok(self) -> bool:
        return self.max_bias <= self.bound + 1e-12 and self.op_norm <= self.op_norm_bound + 1e-12


def real_truncation_report(env: Environment, state: LearnerState, t: int, cfg: MgrConfig) -> TruncationReport:
    """Largest |<x, theta_a - E theta_tilde_a>| over support x and arms, against sigma R exp(-gamma beta lambda (M+1) / K)."""
    dist = _require_finite(env)
    mean = real_mean_estimate_exact(env, state, t, cfg)
    theta = env.adversary.theta(t)
    bias = np.abs(dist.points @ (theta - mean).T)
    rate = state.gamma * cfg.beta * env.bounds.lambda_min / env.K
    pol = lambda X: policy_probs(state, X)
    op = max(operator_norm(matrix_power_apply_matrix(np.eye(env.d) - cfg.beta * action_covariance_exact(dist, pol, a),
                                                     cfg.M + 1)) for a in range(env.K))
    return TruncationReport(
        M=cfg.M, max_bias=float(bias.max()),
        bound=env.bounds.sigma * env.bounds.R * math.exp(-rate * (cfg.M + 1)),
        op_norm=op, op_norm_bound=(1 - rate) ** (cfg.M + 1))


def matrix_power_apply_matrix(m: np.ndarray, p: int) -> np.ndarray:
    return np.stack([matrix_power_apply(m, p, e) for e in np.eye(m.shape[0])], axis=1)


def real_quadratic_mc(env: Environment, state: LearnerState, t: int, cfg: MgrConfig, ghost: GhostSampler,
                      N: int, chunk: int = 20000) -> tuple[float, float]:
    """Monte Carlo mean and standard error of sum_a pi_t(a|X0) <X0, theta_tilde_{t,a}>^2.

    Each sample draws (X_t, A_t) and a fresh MGR pass from the ghost stream;
    the ghost context X0 is integrated exactly on finite supports.
    """
    dist = env.distribution
    finite = isinstance(dist, FiniteSupport)
    pol = lambda X: policy_probs(state, X)
    oracle = ResamplingOracle(dist, pol, ghost.rng)
    vals = []
    done = 0
    # keep one chunk's resampling draws near a few million
    chunk = max(1, min(chunk, 4_000_000 // max(cfg.M, 1)))
    while done < N:
        n = min(chunk, N - done)
        xt, at = oracle.draw(n)
        q = mgr_fast_batch(cfg, oracle, xt, at)
        lt = np.einsum("nd,nd->n", xt, env.adversary.theta(t)[at]) + \
            env.adversary.residual(t, xt)[np.arange(n), at]
        if finite:
            pi0 = policy_probs(state, dist.points)[:, at]            # (n0, n)
            inner = dist.points @ q.T                                  # (n0, n)
            v = dist.probs @ (pi0 * inner ** 2)
        else:
            x0 = ghost.sample(n)
            pi0 = policy_probs(state, x0)[np.arange(n), at]
            v = pi0 * np.einsum("nd,nd->n", x0, q) ** 2
        vals.append(v * lt ** 2)
        done += n
    vals = np.concatenate(vals)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))


def verify_bias_and_quadratic(env: Environment, state: LearnerState, t: int, ghost: Optional[GhostSampler] = None,
                              N: int = 100_000) -> BiasQuadReport:
    """Bias and second-moment checks for the learner's estimator at a frozen round-``t`` state."""
    kind = state.estimator
    if isinstance(kind, (Robust, FullInfo)):
        rep = robust_bias_report(env, state, t)
        if isinstance(kind, FullInfo):
            rep.estimator = "fullinfo"
        return rep
    if isinstance(kind, RealMGR):
        if ghost is None:
            raise ValueError("the MGR quadratic term needs a ghost sampler")
        dist = _require_finite(env)
        mean = real_mean_estimate_exact(env, state, t, kind.cfg)
        theta = env.adversary.theta(t)
        mu = dist.probs @ dist.points
        exp_loss = dist.probs @ env.adversary.losses(t, dist.points)
        q, se = real_quadratic_mc(env, state, t, kind.cfg, ghost, N)
        trunc = real_truncation_report(env, state, t, kind.cfg)
        rep = BiasQuadReport(
            estimator="real", epsilon=env.adversary.epsilon, d=env.d, K=env.K, gamma=state.gamma,
            bias_vs_loss=np.abs(mean @ mu - exp_loss), bias_linear=np.abs((mean - theta) @ mu),
            quadratic=q, quadratic_stderr=se, quadratic_bound=3 * env.K * env.d,
            bias_bound=trunc.bound + env.adversary.epsilon * math.sqrt(env.d))
        rep.extras["truncation"] = trunc
        return rep
    raise ValueError(f"no bias/quadratic check for estimator {type(kind).__name__}")


# ---------------------------------------------------------------------------
# MGR expectation by enumeration
# ---------------------------------------------------------------------------

def enumerate_mgr_expectation(dist: FiniteSupport, probs: np.ndarray, a: int, cfg: MgrConfig) -> np.ndarray:
    """Exact E[mgr_naive] by summing over all (point, action)^M draw sequences.

    ``probs`` is the (n, K) policy table at the support points. Cost grows as
    (n K)^M, so this is only for tiny instances.
    """
    n, K = probs.shape
    outcomes = [(i, b, dist.probs[i] * probs[i, b]) for i in range(n) for b in range(K)]
    total = np.zeros((dist.dim, dist.dim))
    for seq in itertools.product(outcomes, repeat=cfg.M):
        w = 1.0
        for _, _, p in seq:
            w *= p
        if w == 0.0:
            continue
        oracle = ScriptedOracle(dist.points[[s[0] for s in seq]].reshape(cfg.M, dist.dim),
                                [s[1] for s in seq], num_arms=K)
        total += w * mgr_naive(cfg, oracle, a)
    if cfg.M == 0:
        total = mgr_naive(cfg, ScriptedOracle(np.zeros((0, dist.dim)), np.zeros(0, dtype=int), K), a)
    return total
