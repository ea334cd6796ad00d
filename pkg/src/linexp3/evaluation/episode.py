"""Comparator policy and single-episode execution."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .. import streams
from ..environment import Environment, FiniteSupport
from ..errors import LossOutOfRange
from ..learner import (Counterfactual, FullInfo, LearnerState, RealMGR, Robust, Uniform,
                       draw_action_from_uniform, fullinfo_estimate, mixed_softmax, policy_probs,
                       robust_estimates, update)
from ..mgr import MgrConfig, ResamplingOracle, mgr_all_arms_fast, mgr_naive

ALGORITHMS = ("robust_linexp3", "real_linexp3", "fullinfo", "counterfactual", "uniform")


@dataclass(frozen=True)
class ComparatorPolicy:
    """x -> argmin_a <x, sum_t theta_{t,a}>, ties to the lowest arm index."""

    cum_theta: np.ndarray

    @classmethod
    def from_adversary(cls, adv, T: Optional[int] = None) -> "ComparatorPolicy":
        T = adv.horizon if T is None else T
        return cls(adv.theta_sequence(T).sum(axis=0))

    def __call__(self, x: np.ndarray):
        return np.argmin(np.asarray(x, dtype=float) @ self.cum_theta.T, axis=-1)


def comparator_policy(adv, T: Optional[int] = None) -> ComparatorPolicy:
    return ComparatorPolicy.from_adversary(adv, T)


@dataclass(frozen=True)
class LearnerConfig:
    """Fully resolved hyperparameters for one algorithm (no "auto" values left)."""

    algorithm: str
    eta: float = 0.0
    gamma: float = 0.0
    beta: Optional[float] = None
    M: Optional[int] = None
    mgr_mode: str = "fast"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")

    def estimator(self, env: Environment):
        if self.algorithm == "robust_linexp3":
            return Robust(env.bounds.SigmaInv)
        if self.algorithm == "real_linexp3":
            cfg = MgrConfig(self.beta, self.M)
            cfg.check(env.bounds.sigma)
            return RealMGR(cfg, self.mgr_mode)
        if self.algorithm == "fullinfo":
            return FullInfo(env.bounds.SigmaInv)
        if self.algorithm == "counterfactual":
            return Counterfactual()
        return Uniform()

    def initial_state(self, env: Environment) -> LearnerState:
        return LearnerState.initial(env.K, env.d, self.eta, self.gamma, self.estimator(env))

    def digest(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def env_digest(env: Environment, T: int) -> str:
    h = hashlib.sha256()
    dist = env.distribution
    h.update(type(dist).__name__.encode())
    if isinstance(dist, FiniteSupport):
        h.update(dist.points.tobytes())
        h.update(dist.probs.tobytes())
    else:
        h.update(repr((dist.dim, dist.sigma)).encode())
    h.update(np.ascontiguousarray(env.adversary.theta_sequence(T)).tobytes())
    ms = env.adversary.misspec
    if ms is not None:
        h.update(repr((ms.kind, ms.magnitude, ms.frequency)).encode())
        h.update(ms.directions.tobytes())
    return h.hexdigest()


def config_hash(env: Environment, cfg: LearnerConfig, T: int) -> str:
    return hashlib.sha256((env_digest(env, T) + cfg.digest() + str(T)).encode()).hexdigest()[:16]


@dataclass
class RunRecord:
    seed: int
    replication: int
    config_hash: str
    contexts: np.ndarray
    actions: np.ndarray
    learner_loss: np.ndarray
    comparator_loss: np.ndarray
    probs: Optional[np.ndarray] = None
    estimates: Optional[np.ndarray] = None
    exact_learner_loss: Optional[np.ndarray] = None
    exact_comparator_loss: Optional[np.ndarray] = None
    extras: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return len(self.actions)

    @property
    def regret(self) -> np.ndarray:
        return self.learner_loss - self.comparator_loss

    @property
    def exact_regret(self) -> Optional[np.ndarray]:
        if self.exact_learner_loss is None:
            return None
        return self.exact_learner_loss - self.exact_comparator_loss


def _support_policy(state: LearnerState, env: Environment, t: int) -> np.ndarray:
    """pi_t(.|x) at every support point, shape (n, K)."""
    pts = env.distribution.points
    if isinstance(state.estimator, Counterfactual):
        return mixed_softmax(-state.eta * env.adversary.cumulative_losses(t, pts), 0.0)
    return policy_probs(state, pts)


def run_episode(env: Environment, cfg: LearnerConfig, T: Optional[int] = None, seed: int = 0,
                replication: int = 0, trace: bool = False, exact: bool = False,
                config_id: Optional[str] = None) -> RunRecord:
    """Play ``T`` rounds of bandit interaction; deterministic given (env, cfg, seed, replication).

    ``trace`` keeps per-round probabilities and estimates. ``exact`` (finite
    support only) also records, per round, the learner's and comparator's loss
    averaged exactly over the context law and the learner's action choice.
    """
    adv = env.adversary
    T = adv.horizon if T is None else T
    if T > adv.horizon:
        raise ValueError(f"T={T} exceeds adversary horizon {adv.horizon}")
    if exact and not isinstance(env.distribution, FiniteSupport):
        raise ValueError("exact evaluation needs a finite-support context distribution")
    K, d = env.K, env.d
    comparator = comparator_policy(adv, T)
    state = cfg.initial_state(env)
    est_kind = state.estimator

    contexts = env.distribution.sample_batch(streams.stream(seed, streams.CONTEXT, replication), T)
    uniforms = streams.stream(seed, streams.ACTION, replication).random(T)
    comp_arms = comparator(contexts)

    actions = np.empty(T, dtype=np.int64)
    learner_loss = np.empty(T)
    comp_loss = np.empty(T)
    probs_rec = np.empty((T, K)) if trace else None
    est_rec = np.empty((T, K, d)) if trace else None
    if exact:
        pts = env.distribution.points
        pw = env.distribution.probs
        pts_comp = comparator(pts)
        ex_learner = np.empty(T)
        ex_comp = np.empty(T)

    for i in range(T):
        t = i + 1
        x = contexts[i]
        losses = adv.losses(t, x)
        if np.any(np.abs(losses) > 1.0 + 1e-12):
            a = int(np.argmax(np.abs(losses)))
            raise LossOutOfRange(f"loss {losses[a]:.6g} at round {t}", t=t, x=x, a=a)
        if isinstance(est_kind, Counterfactual):
            p = mixed_softmax(-state.eta * adv.cumulative_losses(t, x), 0.0)
        else:
            p = policy_probs(state, x)
        A = draw_action_from_uniform(p, uniforms[i])
        loss = float(losses[A])
        actions[i] = A
        learner_loss[i] = loss
        comp_loss[i] = losses[comp_arms[i]]

        if exact:
            pol = _support_policy(state, env, t)
            L = adv.losses(t, pts)
            ex_learner[i] = pw @ np.sum(pol * L, axis=1)
            ex_comp[i] = pw @ L[np.arange(len(pts)), pts_comp]

        if isinstance(est_kind, Robust):
            est = robust_estimates(est_kind.sigma_inv, x, A, p[A], loss, K)
        elif isinstance(est_kind, RealMGR):
            est = np.zeros((K, d))
            frozen = state
            oracle = ResamplingOracle(env.distribution, lambda X: policy_probs(frozen, X),
                                      streams.stream(seed, streams.MGR, replication, t))
            if est_kind.mode == "fast":
                est[A] = loss * mgr_all_arms_fast(est_kind.cfg, oracle, x, K)[A]
            else:
                est[A] = loss * (mgr_naive(est_kind.cfg, oracle, A) @ x)
        elif isinstance(est_kind, FullInfo):
            est = fullinfo_estimate(est_kind.sigma_inv, x, losses)
        else:
            est = None

        if trace:
            probs_rec[i] = p
            est_rec[i] = 0.0 if est is None else est
        if est is not None:
            state = update(state, est)

    rec = RunRecord(
        seed=seed, replication=replication,
        config_hash=config_id if config_id is not None else config_hash(env, cfg, T),
        contexts=contexts, actions=actions, learner_loss=learner_loss, comparator_loss=comp_loss,
        probs=probs_rec, estimates=est_rec)
    if exact:
        rec.exact_learner_loss = ex_learner
        rec.exact_comparator_loss = ex_comp
    rec.extras["final_state"] = state
    return rec
