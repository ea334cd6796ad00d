"""Experiment configuration in a flat ``key = value`` text format.

Example::

    # robust learner on the standard benchmark
    algorithm = robust_linexp3
    K = 4
    d = 4
    T = 4096
    replications = 16
    environment.kind = benchmark
    environment.name = standard
    adversary.epsilon = 0.1

Lines starting with ``#`` and blank lines are ignored; trailing ``# ...`` is a
comment too. Environment and adversary settings use dotted keys. Matrices are
written as rows separated by ``;`` with entries separated by ``,``.

Context laws (``environment.kind``): ``benchmark`` (with ``environment.name``),
``cell24``, ``signed_basis``, ``random_support`` (``environment.size`` random
sphere points plus the signed basis), ``points`` (explicit
``environment.points`` and optional ``environment.probs``), ``sphere`` and
``cube``. ``environment.radius`` scales the first five and is the radius or
half-width of the last two.

Adversaries (``adversary.kind``, ignored for benchmarks): ``basis``
(theta_a = -norm * e_a), ``constant`` (explicit ``adversary.theta``),
``random_constant``, ``piecewise`` (``adversary.segments`` random blocks) and
``sinusoidal`` (basis parameters, ``adversary.amplitude``, ``adversary.period``).
``adversary.epsilon`` adds a residual of kind ``adversary.misspec``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from . import benchmarks
from .environment import (ConstantAdversary, CubeUniform, Environment, FiniteSupport, SinusoidalDrift,
                          SphereUniform, cell24, make_misspec, random_piecewise, random_sphere_support,
                          random_unit_rows, scale_to_bound, signed_basis)
from .errors import LinExp3Error, ParseError, ValidationError
from .evaluation.episode import ALGORITHMS, LearnerConfig
from .learner import TunedParams, tune_counterfactual, tune_fullinfo, tune_real, tune_robust

AUTO = "auto"
SEED_MASK = (1 << 64) - 1

_TOP_KEYS = {"algorithm", "K", "d", "T", "seed", "replications", "eta", "gamma", "beta", "M", "mgr_mode",
             "evaluation", "output"}
_ENV_KEYS = {"kind", "name", "radius", "points", "probs", "size", "seed"}
_ADV_KEYS = {"kind", "theta", "segments", "norm", "amplitude", "period", "epsilon", "misspec", "seed"}
_ENV_KINDS = ("benchmark", "cell24", "signed_basis", "random_support", "points", "sphere", "cube")
_ADV_KINDS = ("basis", "constant", "random_constant", "piecewise", "sinusoidal")

Param = Union[float, str]


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one experiment.

    ``eta``/``gamma``/``beta``/``M`` hold what the user wrote (a number or
    ``"auto"``); :meth:`resolve` turns them into a :class:`LearnerConfig`.
    """

    algorithm: str
    K: int
    d: int
    T: int
    environment: dict
    adversary: dict = field(default_factory=dict)
    seed: int = 0
    replications: int = 8
    eta: Param = AUTO
    gamma: Param = AUTO
    beta: Param = AUTO
    M: Union[int, str] = AUTO
    mgr_mode: str = "fast"
    evaluation: str = "realized"
    output: Optional[str] = None

    def with_horizon(self, T: int) -> "ExperimentConfig":
        return replace(self, T=int(T))

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed) & SEED_MASK)

    def build_environment(self) -> Environment:
        env = build_environment(self.environment, self.adversary, self.T, K=self.K, d=self.d)
        if env.K != self.K:
            raise ValidationError("K", f"adversary has {env.K} arms but K = {self.K}")
        if env.d != self.d:
            raise ValidationError("d", f"context dimension is {env.d} but d = {self.d}")
        return env

    def resolve(self, env: Optional[Environment] = None) -> tuple[Environment, LearnerConfig, TunedParams]:
        """Build the environment and fill every ``"auto"`` value through the tuning rules."""
        env = self.build_environment() if env is None else env
        b = env.bounds
        K, d, T = self.K, self.d, self.T
        alg = self.algorithm
        if alg == "robust_linexp3":
            tp = tune_robust(T, K, d, b.sigma, b.lambda_min)
        elif alg == "real_linexp3":
            tp = tune_real(T, K, d, b.sigma, b.R, b.lambda_min)
        elif alg == "fullinfo":
            tp = tune_fullinfo(T, K, d, b.sigma, b.lambda_min)
        elif alg == "counterfactual":
            tp = tune_counterfactual(T, K)
        else:
            tp = TunedParams(eta=0.0, gamma=1.0)
        for name in ("eta", "gamma", "beta", "M"):
            given = getattr(self, name)
            if given != AUTO:
                setattr(tp, name, given)
                tp.clamped[name] = False
        if alg == "real_linexp3":
            tp.M = int(tp.M)
        else:
            tp.beta, tp.M = None, None
        cfg = LearnerConfig(alg, eta=float(tp.eta), gamma=float(tp.gamma), beta=tp.beta, M=tp.M,
                            mgr_mode=self.mgr_mode)
        try:
            cfg.estimator(env)
        except ValueError as exc:
            raise ValidationError("beta", str(exc)) from exc
        return env, cfg, tp

    def summary(self) -> dict:
        return {
            "algorithm": self.algorithm, "K": self.K, "d": self.d, "T": self.T, "seed": self.seed,
            "replications": self.replications, "mgr_mode": self.mgr_mode, "evaluation": self.evaluation,
            "environment": dict(self.environment), "adversary": dict(self.adversary),
        }


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _split_lines(text: str) -> list[tuple[int, str, str]]:
    out = []
    seen = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", line=no)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError("empty key", line=no)
        if not value:
            raise ParseError(f"empty value for {key!r}", line=no)
        if key in seen:
            raise ParseError(f"duplicate key {key!r} (first set on line {seen[key]})", line=no)
        seen[key] = no
        out.append((no, key, value))
    return out


def _int(field_name: str, value: str, minimum: int = 1) -> int:
    try:
        v = int(value, 0)
    except ValueError:
        raise ValidationError(field_name, f"expected an integer, got {value!r}") from None
    if v < minimum:
        raise ValidationError(field_name, f"must be >= {minimum}, got {v}")
    return v


def _float(field_name: str, value: str, positive: bool = False, nonneg: bool = False) -> float:
    try:
        v = float(value)
    except ValueError:
        raise ValidationError(field_name, f"expected a number, got {value!r}") from None
    if not math.isfinite(v):
        raise ValidationError(field_name, "must be finite")
    if positive and v <= 0:
        raise ValidationError(field_name, f"must be positive, got {v}")
    if nonneg and v < 0:
        raise ValidationError(field_name, f"must be non-negative, got {v}")
    return v


def _matrix(field_name: str, value: str) -> np.ndarray:
    try:
        rows = [[float(v) for v in row.split(",")] for row in value.split(";")]
    except ValueError:
        raise ValidationError(field_name, f"expected rows of numbers, got {value!r}") from None
    if len({len(r) for r in rows}) != 1:
        raise ValidationError(field_name, "rows have different lengths")
    m = np.array(rows, dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValidationError(field_name, "entries must be finite")
    return m


def _vector(field_name: str, value: str) -> np.ndarray:
    m = _matrix(field_name, value.replace(";", ","))
    return m.reshape(-1)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config; ``"auto"`` values are kept for :meth:`ExperimentConfig.resolve`."""
    top: dict[str, str] = {}
    env: dict[str, str] = {}
    adv: dict[str, str] = {}
    for no, key, value in _split_lines(text):
        if key.startswith("environment."):
            sub = key.split(".", 1)[1]
            if sub not in _ENV_KEYS:
                raise ParseError(f"unknown key {key!r}", line=no)
            env[sub] = value
        elif key.startswith("adversary."):
            sub = key.split(".", 1)[1]
            if sub not in _ADV_KEYS:
                raise ParseError(f"unknown key {key!r}", line=no)
            adv[sub] = value
        elif key in _TOP_KEYS:
            top[key] = value
        else:
            raise ParseError(f"unknown key {key!r}", line=no)

    for required in ("algorithm", "K", "d", "T"):
        if required not in top:
            raise ValidationError(required, "missing")
    if "kind" not in env:
        raise ValidationError("environment.kind", "missing")

    algorithm = top["algorithm"]
    if algorithm not in ALGORITHMS:
        raise ValidationError("algorithm", f"{algorithm!r} is not one of {', '.join(ALGORITHMS)}")
    cfg = ExperimentConfig(
        algorithm=algorithm,
        K=_int("K", top["K"]), d=_int("d", top["d"]), T=_int("T", top["T"]),
        environment=_parse_environment(env), adversary=_parse_adversary(adv),
        seed=_int("seed", top.get("seed", "0"), minimum=0) & SEED_MASK,
        replications=_int("replications", top.get("replications", "8")),
    )
    for name in ("eta", "gamma", "beta"):
        raw = top.get(name, AUTO)
        if raw != AUTO:
            setattr(cfg, name, _float(name, raw, nonneg=(name == "gamma"), positive=(name != "gamma")))
    if cfg.gamma != AUTO and cfg.gamma > 1:
        raise ValidationError("gamma", f"must lie in [0, 1], got {cfg.gamma}")
    raw_m = top.get("M", AUTO)
    if raw_m != AUTO:
        cfg.M = _int("M", raw_m, minimum=0)
    cfg.mgr_mode = top.get("mgr_mode", "fast")
    if cfg.mgr_mode not in ("naive", "fast"):
        raise ValidationError("mgr_mode", f"must be 'naive' or 'fast', got {cfg.mgr_mode!r}")
    cfg.evaluation = top.get("evaluation", "realized")
    if cfg.evaluation not in ("realized", "exact"):
        raise ValidationError("evaluation", f"must be 'realized' or 'exact', got {cfg.evaluation!r}")
    cfg.output = top.get("output")
    # catch shape and loss-range problems at parse time
    try:
        env_obj = cfg.build_environment()
    except ValidationError:
        raise
    except (LinExp3Error, ValueError) as exc:
        raise ValidationError("environment", str(exc)) from exc
    if cfg.evaluation == "exact" and not isinstance(env_obj.distribution, FiniteSupport):
        raise ValidationError("evaluation", "exact evaluation needs a finite-support context law")
    return cfg


def load_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _parse_environment(raw: dict) -> dict:
    kind = raw["kind"]
    if kind not in _ENV_KINDS:
        raise ValidationError("environment.kind", f"{kind!r} is not one of {', '.join(_ENV_KINDS)}")
    out: dict = {"kind": kind}
    if kind == "benchmark":
        name = raw.get("name")
        if name not in benchmarks.BENCHMARKS:
            raise ValidationError("environment.name", f"expected one of {sorted(benchmarks.BENCHMARKS)}")
        out["name"] = name
    if "radius" in raw:
        out["radius"] = _float("environment.radius", raw["radius"], positive=True)
    if kind == "points":
        if "points" not in raw:
            raise ValidationError("environment.points", "missing for kind = points")
        out["points"] = _matrix("environment.points", raw["points"]).tolist()
        if "probs" in raw:
            out["probs"] = _vector("environment.probs", raw["probs"]).tolist()
    if kind in ("random_support", "sphere", "cube", "signed_basis"):
        out["size"] = _int("environment.size", raw.get("size", "16"))
    out["seed"] = _int("environment.seed", raw.get("seed", "0"), minimum=0)
    unused = set(raw) - {"kind", "name", "radius", "points", "probs", "size", "seed"}
    if unused:
        raise ValidationError("environment", f"unsupported keys {sorted(unused)}")
    return out


def _parse_adversary(raw: dict) -> dict:
    out: dict = {"kind": raw.get("kind", "basis")}
    if out["kind"] not in _ADV_KINDS:
        raise ValidationError("adversary.kind", f"{out['kind']!r} is not one of {', '.join(_ADV_KINDS)}")
    out["epsilon"] = _float("adversary.epsilon", raw.get("epsilon", "0"), nonneg=True)
    if out["epsilon"] >= 1:
        raise ValidationError("adversary.epsilon", "must be below 1")
    out["misspec"] = raw.get("misspec", "sign_bump")
    if out["misspec"] not in ("sign_bump", "cosine"):
        raise ValidationError("adversary.misspec", "must be 'sign_bump' or 'cosine'")
    out["norm"] = _float("adversary.norm", raw.get("norm", "1"), positive=True)
    out["seed"] = _int("adversary.seed", raw.get("seed", "0"), minimum=0)
    if out["kind"] == "constant":
        if "theta" not in raw:
            raise ValidationError("adversary.theta", "missing for kind = constant")
        out["theta"] = _matrix("adversary.theta", raw["theta"]).tolist()
    if out["kind"] == "piecewise":
        out["segments"] = _int("adversary.segments", raw.get("segments", "4"))
    if out["kind"] == "sinusoidal":
        out["amplitude"] = _float("adversary.amplitude", raw.get("amplitude", "0.5"), nonneg=True)
        if out["amplitude"] > 1:
            raise ValidationError("adversary.amplitude", "must lie in [0, 1]")
        if "period" in raw:
            out["period"] = _float("adversary.period", raw["period"], positive=True)
    return out


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def _distribution(spec: dict, d_hint: Optional[int]):
    kind = spec["kind"]
    r = spec.get("radius", 1.0)
    if kind == "cell24":
        return cell24(r)
    if kind == "signed_basis":
        return signed_basis(d_hint, r)
    if kind == "random_support":
        return random_sphere_support(d_hint, spec["size"], np.random.default_rng([spec["seed"], 11]), r)
    if kind == "points":
        pts = np.array(spec["points"], dtype=float) * r
        probs = spec.get("probs")
        probs = np.full(len(pts), 1.0 / len(pts)) if probs is None else np.array(probs, dtype=float)
        return FiniteSupport(pts, probs)
    if kind == "sphere":
        return SphereUniform(r, d_hint)
    if kind == "cube":
        return CubeUniform(r, d_hint)
    raise ValidationError("environment.kind", f"cannot build {kind!r}")


def build_environment(env_spec: dict, adv_spec: dict, T: int, K: Optional[int] = None,
                      d: Optional[int] = None) -> Environment:
    """Environment for horizon ``T``; ``K`` and ``d`` size the generated supports and parameters."""
    if env_spec["kind"] == "benchmark":
        return benchmarks.build(env_spec["name"], T, adv_spec.get("epsilon", 0.0))
    dist = _distribution(env_spec, d)
    d = dist.dim
    eps = adv_spec.get("epsilon", 0.0)
    rng = np.random.default_rng([adv_spec.get("seed", 0), 13])
    kind = adv_spec.get("kind", "basis")
    if kind == "constant":
        theta = np.array(adv_spec["theta"], dtype=float)
    else:
        if K is None:
            raise ValidationError("K", "needed to build the adversary")
        if kind in ("basis", "sinusoidal"):
            theta = -np.eye(K, d) * adv_spec.get("norm", 1.0) / dist.sigma
        elif kind == "random_constant":
            theta = random_unit_rows(rng, K, d) * adv_spec.get("norm", 1.0) / dist.sigma
        else:
            theta = None
    K = K if theta is None else theta.shape[0]
    misspec = make_misspec(adv_spec.get("misspec", "sign_bump"), eps, K, d, rng)
    if kind == "piecewise":
        adv = random_piecewise(K, d, T, adv_spec.get("segments", 4), dist.sigma, rng, misspec,
                               norm=adv_spec.get("norm", 1.0))
    elif kind == "sinusoidal":
        base = scale_to_bound(theta, dist.sigma, eps)
        adv = SinusoidalDrift(base, adv_spec.get("amplitude", 0.5), adv_spec.get("period", max(T / 4.0, 1.0)), T,
                              misspec)
    else:
        if kind != "constant":
            theta = scale_to_bound(theta, dist.sigma, eps)
        adv = ConstantAdversary(theta, T, misspec)
    return Environment.build(dist, adv)

