import numpy as np
import pytest
from hypothesis import given, strategies as st

from linexp3.environment import FiniteSupport, cell24, random_sphere_support
from linexp3.errors import NotPositiveDefinite, SingularCovariance
from linexp3.evaluation.verify import enumerate_mgr_expectation
from linexp3.mgr import (MgrConfig, ResamplingOracle, ScriptedOracle, action_covariance_exact,
                         expected_sigma_plus, mgr_all_arms_fast, mgr_fast, mgr_fast_batch, mgr_naive)
from linexp3.numkit import operator_norm

E1 = np.array([1.0, 0.0])


def scripted(X, A, K=2):
    return ScriptedOracle(np.asarray(X, dtype=float), np.asarray(A), K)


def random_script(rng, M, d, K):
    X = rng.standard_normal((M, d))
    X /= np.maximum(np.linalg.norm(X, axis=1, keepdims=True), 1e-12)
    return X.reshape(M, d), rng.integers(0, K, size=M)


class TestConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            MgrConfig(0.0, 3)
        with pytest.raises(ValueError):
            MgrConfig(0.5, -1)
        with pytest.raises(ValueError):
            MgrConfig(0.5, 1.5)

    def test_beta_limit(self):
        MgrConfig(0.125, 3).check(2.0)
        with pytest.raises(ValueError):
            MgrConfig(0.2, 3).check(2.0)


class TestNaive:
    def test_zero_iterations(self):
        np.testing.assert_array_equal(mgr_naive(MgrConfig(0.5, 0), scripted(np.zeros((0, 2)), []), 0),
                                      0.5 * np.eye(2))

    def test_single_matched_step(self):
        out = mgr_naive(MgrConfig(0.5, 1), scripted([E1], [0]), 0)
        np.testing.assert_allclose(out, np.diag([0.75, 1.0]))

    def test_single_unmatched_step(self):
        out = mgr_naive(MgrConfig(0.5, 1), scripted([E1], [1]), 0)
        np.testing.assert_array_equal(out, np.eye(2))

    def test_consumes_exactly_m_draws(self):
        rng = np.random.default_rng(0)
        X, A = random_script(rng, 10, 3, 2)
        o = scripted(X, A)
        mgr_naive(MgrConfig(0.5, 4), o, 0)
        assert o.pos == 4

    def test_contraction_bound(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            M = int(rng.integers(0, 30))
            X, A = random_script(rng, M, 3, 2)
            cfg = MgrConfig(0.5, M)
            assert operator_norm(mgr_naive(cfg, scripted(X, A), 0)) <= cfg.beta * (M + 1) + 1e-12


class TestFast:
    def test_zero_iterations(self):
        x = np.array([0.3, -0.2])
        np.testing.assert_array_equal(mgr_fast(MgrConfig(0.5, 0), scripted(np.zeros((0, 2)), []), 0, x), 0.5 * x)

    def test_single_matched_step(self):
        np.testing.assert_allclose(mgr_fast(MgrConfig(0.5, 1), scripted([E1], [0]), 0, E1), [0.75, 0.0])

    def test_all_unmatched(self):
        rng = np.random.default_rng(2)
        X, _ = random_script(rng, 7, 2, 2)
        x = np.array([0.4, 0.1])
        out = mgr_fast(MgrConfig(0.5, 7), scripted(X, np.ones(7, dtype=int)), 0, x)
        np.testing.assert_allclose(out, 0.5 * 8 * x)

    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 8), st.integers(0, 64), st.integers(1, 4))
    def test_matches_naive(self, seed, d, M, K):
        rng = np.random.default_rng(seed)
        X, A = random_script(rng, M, d, K)
        x = rng.standard_normal(d)
        a = int(rng.integers(0, K))
        cfg = MgrConfig(0.5, M)
        fast = mgr_fast(cfg, scripted(X, A, K), a, x)
        naive = mgr_naive(cfg, scripted(X, A, K), a) @ x
        np.testing.assert_allclose(fast, naive, atol=1e-10)


class TestAllArms:
    def test_single_arm(self):
        rng = np.random.default_rng(3)
        X, A = random_script(rng, 9, 3, 1)
        x = rng.standard_normal(3)
        cfg = MgrConfig(0.5, 9)
        out = mgr_all_arms_fast(cfg, scripted(X, A, 1), x, 1)
        np.testing.assert_allclose(out[0], mgr_fast(cfg, scripted(X, A, 1), 0, x), atol=1e-14)

    def test_zero_iterations(self):
        x = np.array([1.0, 2.0])
        out = mgr_all_arms_fast(MgrConfig(0.5, 0), scripted(np.zeros((0, 2)), [], 3), x, 3)
        np.testing.assert_array_equal(out, np.tile(0.5 * x, (3, 1)))

    def test_scripted_two_arms(self):
        # draws: arm 0 at e1, then arm 1 at e1; start from x = e1
        cfg = MgrConfig(0.5, 2)
        out = mgr_all_arms_fast(cfg, scripted([E1, E1], [0, 1]), E1, 2)
        # arm 0: y = e1, 0.5 e1, 0.5 e1 -> 0.5 * 2 e1; arm 1: y = e1, e1, 0.5 e1 -> 0.5 * 2.5 e1
        np.testing.assert_allclose(out, [[1.0, 0.0], [1.25, 0.0]])
        for a in range(2):
            np.testing.assert_allclose(out[a], mgr_fast(cfg, scripted([E1, E1], [0, 1]), a, E1))

    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 6), st.integers(0, 80), st.integers(1, 5))
    def test_matches_per_arm_fast(self, seed, d, M, K):
        rng = np.random.default_rng(seed)
        X, A = random_script(rng, M, d, K)
        x = rng.standard_normal(d)
        cfg = MgrConfig(0.5, M)
        out = mgr_all_arms_fast(cfg, scripted(X, A, K), x, K)
        for a in range(K):
            np.testing.assert_allclose(out[a], mgr_fast(cfg, scripted(X, A, K), a, x), atol=1e-12)

    def test_finite_support_path_matches_generic_draws(self):
        dist = cell24()
        table = np.random.default_rng(4).dirichlet(np.ones(4), size=24)
        lookup = {tuple(p): i for i, p in enumerate(dist.points)}
        policy = lambda X: table[[lookup[tuple(x)] for x in np.atleast_2d(X)]]
        cfg = MgrConfig(0.5, 300)
        x = dist.points[5]
        fused = mgr_all_arms_fast(cfg, ResamplingOracle(dist, policy, np.random.default_rng(9)), x)
        X, A = ResamplingOracle(dist, policy, np.random.default_rng(9)).draw(cfg.M)
        generic = mgr_all_arms_fast(cfg, scripted(X, A, 4), x, 4)
        np.testing.assert_array_equal(fused, generic)

    def test_batch_matches_scripted(self):
        dist = cell24()
        policy = lambda X: np.tile([0.1, 0.2, 0.3, 0.4], (len(np.atleast_2d(X)), 1))
        cfg = MgrConfig(0.5, 40)
        xs, arms = dist.points[:6], np.array([0, 1, 2, 3, 0, 1])
        batch = mgr_fast_batch(cfg, ResamplingOracle(dist, policy, np.random.default_rng(5)), xs, arms)
        X, A = ResamplingOracle(dist, policy, np.random.default_rng(5)).draw(6 * 40)
        for n in range(6):
            sl = slice(n * 40, (n + 1) * 40)
            np.testing.assert_allclose(batch[n], mgr_fast(cfg, scripted(X[sl], A[sl], 4), arms[n], xs[n]),
                                       atol=1e-14)


class TestOracle:
    def test_draw_frequencies(self):
        dist = FiniteSupport(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([0.25, 0.75]))
        policy = lambda X: np.where(np.atleast_2d(X)[:, :1] > 0, [[0.9, 0.1]], [[0.2, 0.8]])
        X, A = ResamplingOracle(dist, policy, np.random.default_rng(6)).draw(200_000)
        first = X[:, 0] == 1.0
        assert abs(first.mean() - 0.25) < 0.01
        assert abs(np.mean(A[first] == 0) - 0.9) < 0.01
        assert abs(np.mean(A[~first] == 0) - 0.2) < 0.01

    def test_continuous_distribution(self):
        from linexp3.environment import SphereUniform
        policy = lambda X: np.full((len(np.atleast_2d(X)), 3), 1 / 3)
        o = ResamplingOracle(SphereUniform(1.0, 2), policy, np.random.default_rng(7))
        X, A = o.draw(100)
        assert X.shape == (100, 2) and set(np.unique(A)) <= {0, 1, 2}
        assert o.num_arms == 3

    def test_scripted_exhaustion(self):
        with pytest.raises(IndexError):
            scripted([E1], [0]).draw(2)


class TestExpectation:
    def test_zero_iterations(self):
        np.testing.assert_array_equal(expected_sigma_plus(np.diag([0.5, 0.25]), MgrConfig(0.5, 0)), 0.5 * np.eye(2))

    def test_one_iteration(self):
        np.testing.assert_allclose(expected_sigma_plus(np.diag([0.5, 0.25]), MgrConfig(0.5, 1)),
                                   np.diag([0.875, 0.9375]))

    def test_limit(self):
        np.testing.assert_allclose(expected_sigma_plus(np.diag([0.5, 0.25]), MgrConfig(0.5, 200)),
                                   np.diag([2.0, 4.0]), atol=1e-10)

    def test_closed_form_uses_exponent_m_plus_one(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((3, 3))
        s = a @ a.T / 10 + 0.05 * np.eye(3)
        for M in (0, 1, 5, 30):
            cfg = MgrConfig(0.5, M)
            step = np.eye(3) - 0.5 * s
            closed = (np.eye(3) - np.linalg.matrix_power(step, M + 1)) @ np.linalg.inv(s)
            np.testing.assert_allclose(expected_sigma_plus(s, cfg), closed, atol=1e-10)

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefinite):
            expected_sigma_plus(np.diag([1.0, 0.0]), MgrConfig(0.5, 3))

    @pytest.mark.parametrize("M", [0, 1, 2, 3])
    def test_enumeration(self, M):
        dist = FiniteSupport(np.array([[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]]), np.array([0.2, 0.5, 0.3]))
        table = np.array([[0.9, 0.1], [0.4, 0.6], [0.5, 0.5]])
        cfg = MgrConfig(0.5, M)
        for a in range(2):
            sig = sum(dist.probs[i] * table[i, a] * np.outer(dist.points[i], dist.points[i]) for i in range(3))
            np.testing.assert_allclose(enumerate_mgr_expectation(dist, table, a, cfg),
                                       expected_sigma_plus(sig, cfg), atol=1e-12)


class TestActionCovariance:
    def test_point_mass(self):
        dist = FiniteSupport(np.array([[1.0, 0.0]]), np.array([1.0]))
        out = action_covariance_exact(dist, lambda X: np.full((len(X), 2), 0.5), 0)
        np.testing.assert_array_equal(out, np.diag([0.5, 0.0]))

    def test_two_orthonormal_points(self):
        dist = FiniteSupport(np.eye(2), np.array([0.5, 0.5]))
        out = action_covariance_exact(dist, lambda X: np.full((len(X), 2), 0.5), 1)
        np.testing.assert_allclose(out, np.diag([0.25, 0.25]))

    def test_uniform_policy_scales_covariance(self):
        dist = random_sphere_support(3, 5, np.random.default_rng(9))
        out = action_covariance_exact(dist, lambda X: np.full((len(X), 4), 0.25), 2)
        np.testing.assert_allclose(out, dist.covariance() / 4, atol=1e-15)

    def test_degenerate_policy(self):
        dist = FiniteSupport(np.eye(2), np.array([0.5, 0.5]))
        policy = lambda X: np.where(np.atleast_2d(X)[:, :1] > 0, [[1.0, 0.0]], [[0.0, 1.0]])
        action_covariance_exact(dist, policy, 0)
        with pytest.raises(SingularCovariance):
            action_covariance_exact(dist, policy, 0, require_pd=True)
