"""Desk-scale benchmark environments.

These are constructions of this package, chosen so that every loss stays in
[-1, 1] by design and the growth orders of the regret are visible at horizons
between 2^10 and 2^14:

``standard``
    24-cell contexts in R^4 (sigma = 1, Sigma = I/4), K = 4, constant
    parameters theta_a = -(1 - eps) e_a. Gaps between arms are as large as the
    loss range allows.
``drifting``
    Same contexts; four equal segments of random unit-norm parameters.
``sinusoidal``
    Same contexts; the standard parameters modulated by phase-shifted cosines.
``orthant``
    Nonnegative contexts and parameters, so losses lie in [0, 1]; four random
    segments. Used for the counterfactual full-information check.

Every builder takes the horizon ``T`` and a misspecification level ``epsilon``
(sign-bump residuals with random directions). Parameters are scaled so that
``|theta| sigma + epsilon <= 1``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .environment import (ConstantAdversary, Environment, FiniteSupport, PiecewiseConstant, SinusoidalDrift,
                          cell24, make_misspec, random_piecewise, scale_to_bound)

BENCHMARK_SEED = 20240601


def _misspec(epsilon: float, K: int, d: int, kind: str = "sign_bump"):
    return make_misspec(kind, epsilon, K, d, np.random.default_rng([BENCHMARK_SEED, 1]))


def standard(T: int, epsilon: float = 0.0) -> Environment:
    theta = -(1.0 - epsilon) * np.eye(4)
    return Environment.build(cell24(), ConstantAdversary(theta, T, _misspec(epsilon, 4, 4)))


def drifting(T: int, epsilon: float = 0.0) -> Environment:
    rng = np.random.default_rng([BENCHMARK_SEED, 2])
    return Environment.build(cell24(), random_piecewise(4, 4, T, 4, 1.0, rng, _misspec(epsilon, 4, 4)))


def sinusoidal(T: int, epsilon: float = 0.0) -> Environment:
    base = -(1.0 - epsilon) * np.eye(4)
    period = max(T / 4.0, 1.0)
    return Environment.build(cell24(), SinusoidalDrift(base, 0.5, period, T, _misspec(epsilon, 4, 4)))


def orthant_support() -> FiniteSupport:
    """e_1..e_4 and (1/2, 1/2, 1/2, 1/2), uniform; all coordinates nonnegative."""
    pts = np.concatenate([np.eye(4), np.full((1, 4), 0.5)])
    return FiniteSupport(pts, np.full(5, 0.2))


def orthant(T: int, epsilon: float = 0.0) -> Environment:
    if epsilon:
        raise ValueError("the orthant benchmark keeps losses in [0, 1] and has no misspecified variant")
    rng = np.random.default_rng([BENCHMARK_SEED, 3])
    starts = [1 + (i * T) // 4 for i in range(4)]
    segs = tuple((s, scale_to_bound(rng.random((4, 4)), 1.0)) for s in starts)
    return Environment.build(orthant_support(), PiecewiseConstant(segs, T))


BENCHMARKS: dict[str, Callable[..., Environment]] = {
    "standard": standard,
    "drifting": drifting,
    "sinusoidal": sinusoidal,
    "orthant": orthant,
}


def build(name: str, T: int, epsilon: float = 0.0) -> Environment:
    try:
        return BENCHMARKS[name](T, epsilon)
    except KeyError:
        raise ValueError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}") from None
