"""The LinExp3 exponential-weights template, its loss estimators and regret-bound-driven tuning."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from .errors import NonFiniteEstimate
from .mgr import MgrConfig

GAMMA_MAX = 0.99


# ---------------------------------------------------------------------------
# estimator kinds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Robust:
    sigma_inv: np.ndarray


@dataclass(frozen=True)
class RealMGR:
    cfg: MgrConfig
    mode: str = "fast"

    def __post_init__(self):
        if self.mode not in ("naive", "fast"):
            raise ValueError(f"mgr mode must be 'naive' or 'fast', got {self.mode!r}")


@dataclass(frozen=True)
class FullInfo:
    sigma_inv: np.ndarray


@dataclass(frozen=True)
class Counterfactual:
    pass


@dataclass(frozen=True)
class Uniform:
    pass


EstimatorKind = Union[Robust, RealMGR, FullInfo, Counterfactual, Uniform]


@dataclass(frozen=True)
class LearnerState:
    """Cumulative estimates sum_{s<t} theta_hat_s (K x d) plus hyperparameters; ``round`` is t."""

    cum_estimates: np.ndarray
    eta: float
    gamma: float
    estimator: EstimatorKind
    round: int = 1

    @classmethod
    def initial(cls, K: int, d: int, eta: float, gamma: float, estimator: EstimatorKind) -> "LearnerState":
        return cls(np.zeros((K, d)), float(eta), float(gamma), estimator)

    @property
    def K(self) -> int:
        return self.cum_estimates.shape[0]

    @property
    def d(self) -> int:
        return self.cum_estimates.shape[1]


# ---------------------------------------------------------------------------
# policy
# ---------------------------------------------------------------------------

def mixed_softmax(scores: np.ndarray, gamma: float) -> np.ndarray:
    """(1 - gamma) * softmax(scores) + gamma / K along the last axis, renormalised exactly."""
    scores = np.asarray(scores, dtype=float)
    K = scores.shape[-1]
    w = np.exp(scores - scores.max(axis=-1, keepdims=True))
    p = (1.0 - gamma) * w / w.sum(axis=-1, keepdims=True) + gamma / K
    return p / p.sum(axis=-1, keepdims=True)


def policy_probs_from(cum_estimates: np.ndarray, eta: float, gamma: float, x: np.ndarray) -> np.ndarray:
    return mixed_softmax(-eta * (np.asarray(x, dtype=float) @ cum_estimates.T), gamma)


def policy_probs(state: LearnerState, x: np.ndarray) -> np.ndarray:
    """pi_t(.|x); ``x`` may be a single context or an (m, d) batch."""
    if isinstance(state.estimator, Uniform):
        shape = np.shape(x)[:-1] + (state.K,)
        return np.full(shape, 1.0 / state.K)
    return policy_probs_from(state.cum_estimates, state.eta, state.gamma, x)


def draw_action_from_uniform(probs: np.ndarray, u: float) -> int:
    """Inverse-CDF sampling with arms in index order: the first arm whose CDF exceeds ``u``."""
    cdf = np.cumsum(probs)
    return int(min(np.searchsorted(cdf, u, side="right"), len(probs) - 1))


def draw_action(probs: np.ndarray, rng: np.random.Generator) -> int:
    return draw_action_from_uniform(probs, rng.random())


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def robust_estimate(sigma_inv, x, chosen: int, prob_chosen: float, loss: float, a: int) -> np.ndarray:
    if a != chosen:
        return np.zeros(len(x))
    return (loss / prob_chosen) * (sigma_inv @ np.asarray(x, dtype=float))


def robust_estimates(sigma_inv, x, chosen: int, prob_chosen: float, loss: float, K: int) -> np.ndarray:
    out = np.zeros((K, len(x)))
    out[chosen] = robust_estimate(sigma_inv, x, chosen, prob_chosen, loss, chosen)
    return out


def real_estimate(q_or_sigma_plus, x, chosen: int, loss: float, a: int) -> np.ndarray:
    """MGR estimate for arm ``a``.

    Accepts either the matrix ``S+_a`` (naive mode) or the vector ``S+_a x``
    (fast mode).
    """
    x = np.asarray(x, dtype=float)
    if a != chosen:
        return np.zeros(len(x))
    q = np.asarray(q_or_sigma_plus, dtype=float)
    if q.ndim == 2:
        q = q @ x
    return loss * q


def fullinfo_estimate(sigma_inv, x, losses) -> np.ndarray:
    """Sigma^{-1} x l(x, a) for every arm, shape (K, d)."""
    return np.outer(np.asarray(losses, dtype=float), sigma_inv @ np.asarray(x, dtype=float))


def counterfactual_weights(loss_oracle: Callable[[int, np.ndarray, int], float], t: int, x, eta: float,
                           K: int) -> np.ndarray:
    """Exponential weights on the exact past losses at ``x``; no uniform mixing."""
    cum = np.zeros(K)
    for s in range(1, t):
        for a in range(K):
            cum[a] += loss_oracle(s, x, a)
    return mixed_softmax(-eta * cum, 0.0)


def update(state: LearnerState, estimates: np.ndarray) -> LearnerState:
    estimates = np.asarray(estimates, dtype=float)
    if not np.all(np.isfinite(estimates)):
        raise NonFiniteEstimate(f"non-finite estimate at round {state.round}")
    return replace(state, cum_estimates=state.cum_estimates + estimates, round=state.round + 1)


# ---------------------------------------------------------------------------
# tuning
# ---------------------------------------------------------------------------

@dataclass
class TunedParams:
    eta: float
    gamma: float
    beta: Optional[float] = None
    M: Optional[int] = None
    clamped: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"eta": self.eta, "gamma": self.gamma, "beta": self.beta, "M": self.M,
                "clamped": dict(self.clamped), "warnings": list(self.warnings)}


def _clamp_gamma(gamma: float, tp: TunedParams) -> float:
    if gamma >= 1.0:
        tp.clamped["gamma"] = True
        tp.warnings.append(f"gamma={gamma:.4g} >= 1; clamped to {GAMMA_MAX} (T too small for the tuning)")
        return GAMMA_MAX
    tp.clamped["gamma"] = False
    return gamma


def _log_arms(K: int) -> float:
    if K < 2:
        warnings.warn("tuning with K < 2; using log 2 in place of log K")
    return math.log(max(K, 2))


def tune_robust(T: int, K: int, d: int, sigma: float, lambda_min: float) -> TunedParams:
    """eta = T^{-2/3} (Kd)^{-1/3} (log K)^{2/3}, gamma = T^{-1/3} (Kd log K)^{1/3}, then
    eta <= gamma * lambda_min / (K sigma^2)."""
    logK = _log_arms(K)
    eta = T ** (-2 / 3) * (K * d) ** (-1 / 3) * logK ** (2 / 3)
    gamma = T ** (-1 / 3) * (K * d * logK) ** (1 / 3)
    tp = TunedParams(eta=eta, gamma=gamma)
    tp.gamma = _clamp_gamma(gamma, tp)
    cap = tp.gamma * lambda_min / (K * sigma ** 2)
    tp.clamped["eta"] = eta > cap
    if eta > cap:
        tp.warnings.append(f"eta={eta:.4g} exceeds gamma*lambda_min/(K sigma^2)={cap:.4g}; clamped")
        tp.eta = cap
    return tp


def tune_real(T: int, K: int, d: int, sigma: float, R: float, lambda_min: float) -> TunedParams:
    """beta = 1/(2 sigma^2), gamma = sqrt(L / T), M = ceil(K sigma^2 L / (gamma lambda_min)),
    eta = sqrt(log K / (d K T L)) capped at 2 / (M + 1), where L = log(max(T sigma^2 R^2, e))."""
    logK = _log_arms(K)
    arg = T * sigma ** 2 * R ** 2
    tp = TunedParams(eta=0.0, gamma=0.0)
    tp.clamped["log"] = arg <= math.e
    if arg <= math.e:
        tp.warnings.append(f"T sigma^2 R^2 = {arg:.4g} <= e; log term clamped to 1")
    L = math.log(max(arg, math.e))
    tp.beta = 1.0 / (2.0 * sigma ** 2)
    tp.gamma = _clamp_gamma(math.sqrt(L / T), tp)
    tp.M = int(math.ceil(K * sigma ** 2 * L / (tp.gamma * lambda_min)))
    eta = math.sqrt(logK / (d * K * T * L))
    cap = 2.0 / (tp.M + 1)
    tp.clamped["eta"] = eta > cap
    if eta > cap:
        tp.warnings.append(f"eta={eta:.4g} exceeds 2/(M+1)={cap:.4g}; clamped")
        eta = cap
    tp.eta = eta
    return tp


def tune_fullinfo(T: int, K: int, d: int, sigma: float, lambda_min: float) -> TunedParams:
    """eta = sqrt(d log K / T) capped at lambda_min / sigma^2; no exploration."""
    eta = math.sqrt(d * _log_arms(K) / T)
    cap = lambda_min / sigma ** 2
    tp = TunedParams(eta=min(eta, cap), gamma=0.0, clamped={"eta": eta > cap})
    if eta > cap:
        tp.warnings.append(f"eta={eta:.4g} exceeds lambda_min/sigma^2={cap:.4g}; clamped")
    return tp


def tune_counterfactual(T: int, K: int) -> TunedParams:
    return TunedParams(eta=math.sqrt(8 * _log_arms(K) / T), gamma=0.0, clamped={"eta": False})
