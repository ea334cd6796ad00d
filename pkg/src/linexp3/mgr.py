"""Matrix Geometric Resampling: stochastic estimates of inverse action-covariance matrices.

Given sampling access to the context law and the current policy, one pass of
``M`` draws ``(X(k), A(k))`` produces

    S+ = beta * I + beta * sum_{k=1}^{M} A_k,   A_k = (I - beta B_k) A_{k-1},  A_0 = I,

with ``B_k = 1{A(k) = a} X(k) X(k)^T``. Its expectation is
``beta * sum_{k=0}^{M} (I - beta Sigma_a)^k``, a truncated Neumann series for
``Sigma_a^{-1}``. The product is accumulated by left multiplication so that
``S+ @ x`` matches the vector recursion of the fast variant exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numba
import numpy as np

from .environment import ContextDistribution, FiniteSupport
from .errors import SingularCovariance
from .numkit import as_symmetric, spd_factorize

Policy = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class MgrConfig:
    beta: float
    M: int

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if int(self.M) != self.M or self.M < 0:
            raise ValueError("M must be a non-negative integer")
        object.__setattr__(self, "M", int(self.M))

    def check(self, sigma: float) -> None:
        """Raise unless beta <= 1 / (2 sigma^2), the range where every factor is a contraction."""
        limit = 1.0 / (2.0 * sigma * sigma)
        if self.beta > limit * (1 + 1e-12):
            raise ValueError(f"beta={self.beta} exceeds 1/(2 sigma^2)={limit}")


class ResamplingOracle:
    """Fresh (context, action) pairs from the context law and a frozen policy.

    ``policy`` maps an (m, d) batch of contexts to an (m, K) array of action
    probabilities. The oracle owns ``rng``; nothing else should draw from it.
    """

    def __init__(self, distribution: ContextDistribution, policy: Policy, rng: np.random.Generator):
        self.distribution = distribution
        self.policy = policy
        self.rng = rng
        self._support_cdf = None
        if isinstance(distribution, FiniteSupport):
            probs = np.asarray(policy(distribution.points), dtype=float)
            self._support_cdf = np.cumsum(probs, axis=1)

    @property
    def num_arms(self) -> int:
        if self._support_cdf is not None:
            return self._support_cdf.shape[1]
        return np.asarray(self.policy(self.distribution.sample_batch(np.random.default_rng(0), 1))).shape[1]

    @property
    def finite(self) -> bool:
        return self._support_cdf is not None

    def draw_uniforms(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """The raw uniforms :meth:`draw` would consume (finite supports only)."""
        return self.rng.random(m), self.rng.random(m)

    def draw(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        dist = self.distribution
        if self._support_cdf is not None:
            u_idx, u_act = self.draw_uniforms(m)
            idx = np.minimum(np.searchsorted(dist._cdf, u_idx, side="right"), dist.size - 1)
            A = (self._support_cdf[idx] <= u_act[:, None]).sum(axis=1)
            return dist.points[idx], np.minimum(A, self._support_cdf.shape[1] - 1)
        X = dist.sample_batch(self.rng, m)
        cdf = np.cumsum(np.asarray(self.policy(X), dtype=float), axis=1)
        u = self.rng.random(m)
        A = (cdf <= u[:, None]).sum(axis=1)
        return X, np.minimum(A, cdf.shape[1] - 1)


class ScriptedOracle:
    """Replays a fixed sequence of draws; used to compare estimators on identical randomness."""

    def __init__(self, contexts, actions, num_arms: Optional[int] = None):
        self.contexts = np.atleast_2d(np.asarray(contexts, dtype=float))
        self.actions = np.asarray(actions, dtype=np.int64)
        self._num_arms = num_arms
        self.pos = 0

    @property
    def num_arms(self) -> int:
        if self._num_arms is not None:
            return self._num_arms
        return int(self.actions.max()) + 1 if self.actions.size else 1

    def draw(self, m: int):
        if self.pos + m > len(self.actions):
            raise IndexError("scripted oracle exhausted")
        sl = slice(self.pos, self.pos + m)
        self.pos += m
        return self.contexts[sl], self.actions[sl]


def mgr_naive(cfg: MgrConfig, oracle, a: int) -> np.ndarray:
    """Matrix-valued MGR estimate of Sigma_a^{-1}; consumes exactly ``cfg.M`` draws."""
    X, A = oracle.draw(cfg.M)
    d = X.shape[1] if X.size else _oracle_dim(oracle)
    eye = np.eye(d)
    prod = eye.copy()
    total = eye.copy()
    for x, act in zip(X, A):
        if act == a:
            prod = (eye - cfg.beta * np.outer(x, x)) @ prod
        total += prod
    return cfg.beta * total


def _oracle_dim(oracle) -> int:
    if hasattr(oracle, "distribution"):
        return oracle.distribution.dim
    return oracle.contexts.shape[1]


def mgr_fast(cfg: MgrConfig, oracle, a: int, x: np.ndarray) -> np.ndarray:
    """``S+ @ x`` for a single arm using only vector operations."""
    X, A = oracle.draw(cfg.M)
    y = np.array(x, dtype=float)
    q = y.copy()
    for xk, act in zip(X, A):
        if act == a:
            y = y - cfg.beta * (y @ xk) * xk
        q += y
    return cfg.beta * q


@numba.njit(cache=True, nogil=True)
def _all_arms_kernel(X, A, x, K, beta):
    M, d = X.shape
    Y = np.empty((K, d))
    q = np.zeros((K, d))
    last = np.zeros(K, dtype=np.int64)
    for a in range(K):
        Y[a] = x
    for k in range(M):
        a = A[k]
        # Y_a was constant over steps last[a] .. k
        steps = k + 1 - last[a]
        dot = 0.0
        for j in range(d):
            q[a, j] += steps * Y[a, j]
            dot += Y[a, j] * X[k, j]
        for j in range(d):
            Y[a, j] -= beta * dot * X[k, j]
        last[a] = k + 1
    for a in range(K):
        steps = M + 1 - last[a]
        for j in range(d):
            q[a, j] += steps * Y[a, j]
    return beta * q


@numba.njit(cache=True, nogil=True)
def _search(cdf, u):
    # first index whose cdf exceeds u, clipped to the last index
    n = cdf.shape[0]
    lo, hi = 0, n
    while lo < hi:
        mid = (lo + hi) // 2
        if cdf[mid] <= u:
            lo = mid + 1
        else:
            hi = mid
    return min(lo, n - 1)


@numba.njit(cache=True, nogil=True)
def _finite_all_arms_kernel(points, point_cdf, policy_cdf, u_idx, u_act, x, beta):
    """Same recursion as ``_all_arms_kernel`` with the finite-support draws decoded inline."""
    M = u_idx.shape[0]
    K = policy_cdf.shape[1]
    d = points.shape[1]
    Y = np.empty((K, d))
    q = np.zeros((K, d))
    last = np.zeros(K, dtype=np.int64)
    for a in range(K):
        Y[a] = x
    for k in range(M):
        i = _search(point_cdf, u_idx[k])
        a = _search(policy_cdf[i], u_act[k])
        steps = k + 1 - last[a]
        dot = 0.0
        for j in range(d):
            q[a, j] += steps * Y[a, j]
            dot += Y[a, j] * points[i, j]
        for j in range(d):
            Y[a, j] -= beta * dot * points[i, j]
        last[a] = k + 1
    for a in range(K):
        steps = M + 1 - last[a]
        for j in range(d):
            q[a, j] += steps * Y[a, j]
    return beta * q


def mgr_all_arms_fast(cfg: MgrConfig, oracle, x: np.ndarray, K: Optional[int] = None) -> np.ndarray:
    """(K, d) array whose row ``a`` is ``S+_a @ x``, sharing one pass of ``M`` draws across arms."""
    K = oracle.num_arms if K is None else K
    x = np.asarray(x, dtype=float)
    if isinstance(oracle, ResamplingOracle) and oracle.finite:
        u_idx, u_act = oracle.draw_uniforms(cfg.M)
        dist = oracle.distribution
        return _finite_all_arms_kernel(dist.points, dist._cdf, oracle._support_cdf, u_idx, u_act, x, float(cfg.beta))
    X, A = oracle.draw(cfg.M)
    if cfg.M == 0:
        return np.tile(cfg.beta * x, (K, 1))
    return _all_arms_kernel(np.ascontiguousarray(X, dtype=float), np.ascontiguousarray(A, dtype=np.int64),
                            x, K, float(cfg.beta))


@numba.njit(cache=True, nogil=True)
def _batch_kernel(X, A, xs, arms, beta):
    """Single-arm fast MGR for many independent (draw block, x, arm) triples."""
    N, M, d = X.shape
    out = np.empty((N, d))
    for n in range(N):
        a = arms[n]
        y = xs[n].copy()
        q = y.copy()
        for k in range(M):
            if A[n, k] == a:
                dot = 0.0
                for j in range(d):
                    dot += y[j] * X[n, k, j]
                for j in range(d):
                    y[j] -= beta * dot * X[n, k, j]
            for j in range(d):
                q[j] += y[j]
        for j in range(d):
            out[n, j] = beta * q[j]
    return out


@numba.njit(cache=True, nogil=True)
def _finite_batch_kernel(points, point_cdf, policy_cdf, u_idx, u_act, xs, arms, beta):
    N, d = xs.shape
    M = u_idx.shape[0] // max(N, 1)
    out = np.empty((N, d))
    y = np.empty(d)
    for n in range(N):
        a = arms[n]
        for j in range(d):
            y[j] = xs[n, j]
            out[n, j] = xs[n, j]
        for k in range(n * M, (n + 1) * M):
            i = _search(point_cdf, u_idx[k])
            if _search(policy_cdf[i], u_act[k]) == a:
                dot = 0.0
                for j in range(d):
                    dot += y[j] * points[i, j]
                for j in range(d):
                    y[j] -= beta * dot * points[i, j]
            for j in range(d):
                out[n, j] += y[j]
        for j in range(d):
            out[n, j] *= beta
    return out


def mgr_fast_batch(cfg: MgrConfig, oracle, xs: np.ndarray, arms: np.ndarray) -> np.ndarray:
    """Independent fast-MGR products for each row of ``xs``; draws ``len(xs) * M`` samples."""
    N, d = xs.shape
    if isinstance(oracle, ResamplingOracle) and oracle.finite:
        u_idx, u_act = oracle.draw_uniforms(N * cfg.M)
        dist = oracle.distribution
        return _finite_batch_kernel(dist.points, dist._cdf, oracle._support_cdf, u_idx, u_act,
                                    np.ascontiguousarray(xs, dtype=float),
                                    np.ascontiguousarray(arms, dtype=np.int64), float(cfg.beta))
    X, A = oracle.draw(N * cfg.M)
    X = np.ascontiguousarray(X.reshape(N, cfg.M, d), dtype=float)
    A = np.ascontiguousarray(A.reshape(N, cfg.M), dtype=np.int64)
    return _batch_kernel(X, A, np.ascontiguousarray(xs, dtype=float),
                         np.ascontiguousarray(arms, dtype=np.int64), float(cfg.beta))


def action_covariance_exact(dist: FiniteSupport, policy: Policy, a: int, require_pd: bool = False) -> np.ndarray:
    """Sigma_a = sum_i p_i pi(a | x_i) x_i x_i^T over a finite support."""
    probs = np.asarray(policy(dist.points), dtype=float)[:, a]
    w = dist.probs * probs
    out = np.zeros((dist.dim, dist.dim))
    for wi, x in zip(w, dist.points):
        out += wi * np.outer(x, x)
    out = as_symmetric(out)
    if require_pd:
        try:
            spd_factorize(out)
        except Exception as exc:
            raise SingularCovariance(str(exc)) from exc
    return out


def expected_sigma_plus(sigma_ta: np.ndarray, cfg: MgrConfig) -> np.ndarray:
    """Exact mean of :func:`mgr_naive`: beta * sum_{k=0}^{M} (I - beta Sigma_a)^k."""
    spd_factorize(sigma_ta)
    d = sigma_ta.shape[0]
    step = np.eye(d) - cfg.beta * sigma_ta
    term = np.eye(d)
    total = np.eye(d)
    for _ in range(cfg.M):
        term = step @ term
        total += term
    return as_symmetric(cfg.beta * total)
