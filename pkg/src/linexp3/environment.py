"""Context distributions, oblivious loss adversaries and the boundedness checks tying them together.

Arms are indexed from 0 and rounds from 1 throughout the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import LossOutOfRange, NotPositiveDefinite, SingularCovariance
from .numkit import as_symmetric, spd_factorize, spd_inverse

PROB_ATOL = 1e-12
SINGULAR_TOL = 1e-12
LOSS_ATOL = 1e-12


# ---------------------------------------------------------------------------
# context distributions
# ---------------------------------------------------------------------------

class ContextDistribution:
    dim: int
    sigma: float

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.sample_batch(rng, 1)[0]

    def sample_batch(self, rng: np.random.Generator, m: int) -> np.ndarray:
        raise NotImplementedError

    def covariance(self) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class FiniteSupport(ContextDistribution):
    points: np.ndarray
    probs: np.ndarray
    sigma: float = field(default=None)

    def __post_init__(self):
        pts = np.atleast_2d(np.array(self.points, dtype=float))
        probs = np.array(self.probs, dtype=float)
        if pts.shape[0] != probs.shape[0]:
            raise ValueError("points and probs differ in length")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > PROB_ATOL:
            raise ValueError(f"probabilities must be non-negative and sum to 1 (sum={probs.sum()!r})")
        norms = np.linalg.norm(pts, axis=1)
        sigma = float(norms.max()) if self.sigma is None else float(self.sigma)
        if np.any(norms > sigma * (1 + 1e-12)):
            raise ValueError(f"support point outside the ball of radius {sigma}")
        pts.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "_cdf", np.cumsum(probs))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def sample_index(self, rng: np.random.Generator, m: int) -> np.ndarray:
        u = rng.random(m)
        return np.minimum(np.searchsorted(self._cdf, u, side="right"), self.size - 1)

    def sample_batch(self, rng, m):
        return self.points[self.sample_index(rng, m)]

    def covariance(self) -> np.ndarray:
        sigma = np.zeros((self.dim, self.dim))
        for p, x in zip(self.probs, self.points):
            sigma += p * np.outer(x, x)
        return as_symmetric(sigma)


@dataclass(frozen=True)
class SphereUniform(ContextDistribution):
    radius: float
    dim: int

    @property
    def sigma(self) -> float:
        return float(self.radius)

    def sample_batch(self, rng, m):
        z = rng.standard_normal((m, self.dim))
        return self.radius * z / np.linalg.norm(z, axis=1, keepdims=True)

    def covariance(self):
        return (self.radius ** 2 / self.dim) * np.eye(self.dim)


@dataclass(frozen=True)
class CubeUniform(ContextDistribution):
    half_width: float
    dim: int

    @property
    def sigma(self) -> float:
        return float(self.half_width * math.sqrt(self.dim))

    def sample_batch(self, rng, m):
        return rng.uniform(-self.half_width, self.half_width, size=(m, self.dim))

    def covariance(self):
        return (self.half_width ** 2 / 3.0) * np.eye(self.dim)


def sample_context(dist: ContextDistribution, rng: np.random.Generator) -> np.ndarray:
    return dist.sample(rng)


def exact_covariance(dist: ContextDistribution) -> np.ndarray:
    """Exact second-moment matrix E[x x^T]; raises SingularCovariance if it is (numerically) singular."""
    sigma = dist.covariance()
    scale = max(float(np.max(np.abs(np.diag(sigma)))), 1.0)
    try:
        lam = spd_factorize(sigma).lambda_min
    except NotPositiveDefinite as exc:
        raise SingularCovariance(str(exc)) from exc
    if lam <= SINGULAR_TOL * scale:
        raise SingularCovariance(f"smallest eigenvalue {lam:.3e}")
    return sigma


# ---------------------------------------------------------------------------
# misspecification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MisspecSpec:
    """Nonlinear residual added to the linear loss, bounded by ``magnitude`` in absolute value.

    ``kind="sign_bump"`` gives ``eps * sign(<x, v_a>)`` (with sign(0) = +1, so the
    bound is always attained); ``kind="cosine"`` gives ``eps * cos(freq * <x, v_a>)``.
    """

    kind: str
    directions: np.ndarray
    magnitude: float
    frequency: float = 1.0

    def __post_init__(self):
        if self.kind not in ("sign_bump", "cosine"):
            raise ValueError(f"unknown misspecification kind {self.kind!r}")
        if self.magnitude < 0:
            raise ValueError("misspecification magnitude must be non-negative")
        v = np.atleast_2d(np.array(self.directions, dtype=float))
        v.setflags(write=False)
        object.__setattr__(self, "directions", v)

    def value(self, x: np.ndarray) -> np.ndarray:
        """Residuals for every arm; ``x`` may be a single context or an (n, d) batch."""
        proj = np.asarray(x, dtype=float) @ self.directions.T
        if self.kind == "sign_bump":
            return self.magnitude * np.where(proj >= 0.0, 1.0, -1.0)
        return self.magnitude * np.cos(self.frequency * proj)


# ---------------------------------------------------------------------------
# adversaries
# ---------------------------------------------------------------------------

class AdversarySpec:
    """Oblivious sequence of per-arm loss parameters, optionally with a misspecification term.

    Subclasses implement :meth:`theta`; everything else derives from it. The
    sequence depends only on the round index, never on the learner.
    """

    horizon: int
    misspec: Optional[MisspecSpec]

    @property
    def num_arms(self) -> int:
        return self.theta(1).shape[0]

    @property
    def dim(self) -> int:
        return self.theta(1).shape[1]

    def theta(self, t: int) -> np.ndarray:
        raise NotImplementedError

    def theta_sequence(self, T: Optional[int] = None) -> np.ndarray:
        T = self.horizon if T is None else T
        return np.stack([self.theta(t) for t in range(1, T + 1)])

    def distinct_thetas(self) -> list[tuple[int, np.ndarray]]:
        """(first round, parameters) for every distinct parameter block in the horizon."""
        return [(t, self.theta(t)) for t in range(1, self.horizon + 1)]

    def cumulative_theta(self, t: int) -> np.ndarray:
        """sum_{s < t} theta_s, cached as prefix sums."""
        prefix = self.__dict__.get("_prefix")
        if prefix is None:
            seq = self.theta_sequence()
            prefix = np.concatenate([np.zeros((1,) + seq.shape[1:]), np.cumsum(seq, axis=0)])
            object.__setattr__(self, "_prefix", prefix)
        return prefix[t - 1]

    @property
    def epsilon(self) -> float:
        return 0.0 if self.misspec is None else float(self.misspec.magnitude)

    def residual(self, t: int, x: np.ndarray) -> np.ndarray:
        if self.misspec is None:
            return np.zeros(np.shape(x)[:-1] + (self.num_arms,))
        return self.misspec.value(x)

    def losses(self, t: int, x: np.ndarray) -> np.ndarray:
        """Loss of every arm at context(s) ``x``, shape (K,) or (n, K); unchecked."""
        return np.asarray(x) @ self.theta(t).T + self.residual(t, x)

    def cumulative_losses(self, t: int, x: np.ndarray) -> np.ndarray:
        """sum_{s < t} loss_s(x, a) for all arms; residuals are time-invariant."""
        lin = np.asarray(x) @ self.cumulative_theta(t).T
        return lin + (t - 1) * self.residual(t, x)

    def norm_bound(self) -> float:
        return max(float(np.max(np.linalg.norm(th, axis=1))) for _, th in self.distinct_thetas())


def _check_params(theta: np.ndarray) -> np.ndarray:
    theta = np.atleast_2d(np.array(theta, dtype=float))
    if not np.all(np.isfinite(theta)):
        raise ValueError("loss parameters must be finite")
    theta.setflags(write=False)
    return theta


@dataclass(frozen=True)
class ConstantAdversary(AdversarySpec):
    params: np.ndarray
    horizon: int
    misspec: Optional[MisspecSpec] = None

    def __post_init__(self):
        object.__setattr__(self, "params", _check_params(self.params))

    def theta(self, t):
        return self.params

    def theta_sequence(self, T=None):
        T = self.horizon if T is None else T
        return np.broadcast_to(self.params, (T,) + self.params.shape).copy()

    def distinct_thetas(self):
        return [(1, self.params)]


@dataclass(frozen=True)
class PiecewiseConstant(AdversarySpec):
    """``segments`` is a list of (start_round, K x d parameters); the first start must be 1."""

    segments: tuple
    horizon: int
    misspec: Optional[MisspecSpec] = None

    def __post_init__(self):
        segs = tuple(sorted(((int(s), _check_params(p)) for s, p in self.segments), key=lambda sp: sp[0]))
        if not segs or segs[0][0] != 1:
            raise ValueError("first segment must start at round 1")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "_starts", np.array([s for s, _ in segs]))

    def theta(self, t):
        i = int(np.searchsorted(self._starts, t, side="right")) - 1
        return self.segments[i][1]

    def theta_sequence(self, T=None):
        T = self.horizon if T is None else T
        idx = np.searchsorted(self._starts, np.arange(1, T + 1), side="right") - 1
        stack = np.stack([p for _, p in self.segments])
        return stack[idx]

    def distinct_thetas(self):
        return [(s, p) for s, p in self.segments if s <= self.horizon]


@dataclass(frozen=True)
class SinusoidalDrift(AdversarySpec):
    """theta_{t,a} = base_a * (1 - amplitude + amplitude * cos(2 pi t / period + 2 pi a / K)).

    With ``amplitude`` in [0, 1] every parameter norm stays below ``|base_a|``;
    ``amplitude = 1`` swings each arm's parameter through its negation.
    """

    base: np.ndarray
    amplitude: float
    period: float
    horizon: int
    misspec: Optional[MisspecSpec] = None

    def __post_init__(self):
        if not 0.0 <= self.amplitude <= 1.0:
            raise ValueError("amplitude must lie in [0, 1]")
        if self.period <= 0:
            raise ValueError("period must be positive")
        object.__setattr__(self, "base", _check_params(self.base))

    def _factor(self, t):
        K = self.base.shape[0]
        phase = 2 * np.pi * np.asarray(t, dtype=float)[..., None] / self.period + 2 * np.pi * np.arange(K) / K
        return 1.0 - self.amplitude + self.amplitude * np.cos(phase)

    def theta(self, t):
        return self._factor(t)[:, None] * self.base

    def theta_sequence(self, T=None):
        T = self.horizon if T is None else T
        return self._factor(np.arange(1, T + 1))[:, :, None] * self.base[None]


def loss_value(adv: AdversarySpec, t: int, x: np.ndarray, a: int) -> float:
    if not 1 <= t <= adv.horizon:
        raise IndexError(f"round {t} outside 1..{adv.horizon}")
    value = float(adv.losses(t, x)[a])
    if abs(value) > 1.0 + LOSS_ATOL:
        raise LossOutOfRange(f"loss {value:.6g} at round {t}, arm {a}", t=t, x=np.asarray(x), a=a)
    return value


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnvironmentBounds:
    sigma: float
    R: float
    lambda_min: float
    Sigma: np.ndarray
    SigmaInv: np.ndarray
    epsilon: float = 0.0


def validate_adversary(adv: AdversarySpec, dist: ContextDistribution) -> EnvironmentBounds:
    """Check |loss| <= 1 everywhere on the support and bundle the environment constants.

    Finite supports are checked exhaustively (every point, arm and distinct
    parameter block); continuous ones through the Cauchy-Schwarz bound
    ``|theta| * sigma + eps <= 1``.
    """
    if adv.dim != dist.dim:
        raise ValueError(f"adversary dimension {adv.dim} != context dimension {dist.dim}")
    eps = adv.epsilon
    if isinstance(dist, FiniteSupport):
        for t, th in adv.distinct_thetas():
            vals = dist.points @ th.T + adv.residual(t, dist.points)
            bad = np.argwhere(np.abs(vals) > 1.0 + LOSS_ATOL)
            if bad.size:
                i, a = bad[0]
                raise LossOutOfRange(
                    f"loss {vals[i, a]:.6g} at round {t}, arm {a}, point {dist.points[i]}",
                    t=t, x=dist.points[i], a=int(a))
    else:
        for t, th in adv.distinct_thetas():
            norms = np.linalg.norm(th, axis=1)
            worst = norms * dist.sigma + eps
            a = int(np.argmax(worst))
            if worst[a] > 1.0 + LOSS_ATOL:
                x = dist.sigma * th[a] / norms[a]
                raise LossOutOfRange(
                    f"worst-case loss bound {worst[a]:.6g} at round {t}, arm {a}", t=t, x=x, a=a)
    sigma_mat = exact_covariance(dist)
    cert = spd_factorize(sigma_mat)
    return EnvironmentBounds(
        sigma=float(dist.sigma), R=adv.norm_bound(), lambda_min=cert.lambda_min,
        Sigma=sigma_mat, SigmaInv=spd_inverse(cert), epsilon=eps)


@dataclass(frozen=True)
class Environment:
    """A validated (distribution, adversary) pair."""

    distribution: ContextDistribution
    adversary: AdversarySpec
    bounds: EnvironmentBounds

    @classmethod
    def build(cls, distribution, adversary) -> "Environment":
        return cls(distribution, adversary, validate_adversary(adversary, distribution))

    @property
    def K(self) -> int:
        return self.adversary.num_arms

    @property
    def d(self) -> int:
        return self.distribution.dim

    @property
    def T(self) -> int:
        return self.adversary.horizon


# ---------------------------------------------------------------------------
# constructors that respect the boundedness assumption by design
# ---------------------------------------------------------------------------

def signed_basis(d: int, radius: float = 1.0) -> FiniteSupport:
    """Uniform law on {+-radius * e_i}; covariance radius^2 / d * I."""
    pts = np.concatenate([np.eye(d), -np.eye(d)]) * radius
    return FiniteSupport(pts, np.full(2 * d, 1.0 / (2 * d)), sigma=radius)


def cell24(radius: float = 1.0) -> FiniteSupport:
    """The 24 vertices of the 24-cell in R^4 (+-e_i and (+-1/2)^4), uniform; covariance radius^2/4 * I."""
    signs = np.array(np.meshgrid(*[[-0.5, 0.5]] * 4, indexing="ij")).reshape(4, -1).T
    pts = np.concatenate([np.eye(4), -np.eye(4), signs]) * radius
    return FiniteSupport(pts, np.full(24, 1.0 / 24), sigma=radius)


def random_sphere_support(d: int, n: int, rng: np.random.Generator, radius: float = 1.0) -> FiniteSupport:
    """``n`` random points on the sphere plus the signed basis, so the covariance is always full rank."""
    z = rng.standard_normal((n, d))
    z = radius * z / np.linalg.norm(z, axis=1, keepdims=True)
    pts = np.concatenate([np.eye(d) * radius, -np.eye(d) * radius, z])
    return FiniteSupport(pts, np.full(len(pts), 1.0 / len(pts)), sigma=radius)


def scale_to_bound(theta: np.ndarray, sigma: float, epsilon: float = 0.0) -> np.ndarray:
    """Rescale rows so that max_a |theta_a| * sigma + epsilon <= 1 (only shrinks)."""
    theta = np.asarray(theta, dtype=float)
    top = float(np.max(np.linalg.norm(theta.reshape(-1, theta.shape[-1]), axis=1)))
    limit = (1.0 - epsilon) / sigma
    return theta if top <= limit or top == 0.0 else theta * (limit / top)


def random_unit_rows(rng: np.random.Generator, K: int, d: int) -> np.ndarray:
    z = rng.standard_normal((K, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def make_misspec(kind: str, epsilon: float, K: int, d: int, rng: np.random.Generator,
                 frequency: float = 3.0) -> Optional[MisspecSpec]:
    if kind in (None, "none") or epsilon == 0.0:
        return None
    return MisspecSpec(kind, random_unit_rows(rng, K, d), epsilon, frequency)


def random_piecewise(K: int, d: int, T: int, n_segments: int, sigma: float, rng: np.random.Generator,
                     misspec: Optional[MisspecSpec] = None, norm: float = 1.0) -> PiecewiseConstant:
    """Segments of equal length with independent random unit-direction parameters of norm ``norm / sigma``."""
    eps = 0.0 if misspec is None else misspec.magnitude
    starts = [1 + (i * T) // n_segments for i in range(n_segments)]
    segs = [(s, scale_to_bound(norm / sigma * random_unit_rows(rng, K, d), sigma, eps)) for s in starts]
    return PiecewiseConstant(tuple(segs), T, misspec)
