import numpy as np
import pytest
from hypothesis import given, strategies as st

from linexp3 import benchmarks
from linexp3.environment import (ConstantAdversary, CubeUniform, Environment, FiniteSupport, MisspecSpec,
                                 PiecewiseConstant, SinusoidalDrift, SphereUniform, cell24, exact_covariance,
                                 loss_value, make_misspec, random_piecewise, random_sphere_support, sample_context,
                                 scale_to_bound, signed_basis, validate_adversary)
from linexp3.errors import LossOutOfRange, SingularCovariance


def two_points():
    return FiniteSupport(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([0.5, 0.5]))


class TestDistributions:
    def test_point_mass_always_returns_point(self):
        dist = FiniteSupport(np.array([[1.0, 0.0]]), np.array([1.0]))
        rng = np.random.default_rng(0)
        for _ in range(20):
            np.testing.assert_array_equal(sample_context(dist, rng), [1.0, 0.0])

    def test_two_point_frequencies(self):
        xs = two_points().sample_batch(np.random.default_rng(1), 100_000)
        assert abs(np.mean(xs[:, 0] == 1.0) - 0.5) <= 0.01

    def test_sphere_norm(self):
        xs = SphereUniform(2.0, 5).sample_batch(np.random.default_rng(2), 1000)
        np.testing.assert_allclose(np.linalg.norm(xs, axis=1), 2.0, atol=1e-12)

    def test_cube_within_sigma(self):
        dist = CubeUniform(0.5, 4)
        xs = dist.sample_batch(np.random.default_rng(3), 1000)
        assert np.all(np.linalg.norm(xs, axis=1) <= dist.sigma)

    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(ValueError):
            FiniteSupport(np.eye(2), np.array([0.5, 0.6]))

    def test_points_outside_declared_radius(self):
        with pytest.raises(ValueError):
            FiniteSupport(np.array([[2.0, 0.0]]), np.array([1.0]), sigma=1.0)

    def test_cell24_is_normalised(self):
        dist = cell24()
        assert dist.size == 24
        np.testing.assert_allclose(np.linalg.norm(dist.points, axis=1), 1.0)
        np.testing.assert_allclose(exact_covariance(dist), np.eye(4) / 4, atol=1e-15)

    def test_random_support_has_full_rank(self):
        dist = random_sphere_support(5, 3, np.random.default_rng(4))
        assert np.linalg.eigvalsh(exact_covariance(dist))[0] > 0


class TestCovariance:
    def test_two_orthonormal_points(self):
        np.testing.assert_array_equal(exact_covariance(two_points()), np.diag([0.5, 0.5]))

    def test_sphere(self):
        np.testing.assert_allclose(exact_covariance(SphereUniform(1.0, 2)), np.diag([0.5, 0.5]))

    def test_cube(self):
        np.testing.assert_allclose(exact_covariance(CubeUniform(0.6, 3)), 0.12 * np.eye(3))

    def test_rank_one_point_mass(self):
        with pytest.raises(SingularCovariance):
            exact_covariance(FiniteSupport(np.array([[1.0, 1.0]]), np.array([1.0])))

    def test_matches_brute_force_sum_bitwise(self):
        rng = np.random.default_rng(5)
        dist = random_sphere_support(3, 7, rng)
        brute = np.zeros((3, 3))
        for p, x in zip(dist.probs, dist.points):
            brute += p * np.outer(x, x)
        brute = np.triu(brute) + np.triu(brute, 1).T
        assert np.array_equal(exact_covariance(dist), brute)

    def test_sphere_monte_carlo(self):
        xs = SphereUniform(1.5, 3).sample_batch(np.random.default_rng(6), 200_000)
        np.testing.assert_allclose(xs.T @ xs / len(xs), 0.75 * np.eye(3), atol=0.01)


class TestLosses:
    def test_inner_product(self):
        adv = ConstantAdversary(np.array([[0.5, 0.0], [0.0, 0.0]]), 10)
        assert loss_value(adv, 1, np.array([1.0, 0.0]), 0) == 0.5

    def test_sign_bump(self):
        ms = MisspecSpec("sign_bump", np.array([[1.0, 0.0], [1.0, 0.0]]), 0.1)
        adv = ConstantAdversary(np.array([[0.5, 0.0], [0.0, 0.0]]), 10, ms)
        assert loss_value(adv, 1, np.array([1.0, 0.0]), 0) == pytest.approx(0.6, abs=1e-15)

    def test_zero(self):
        ms = MisspecSpec("cosine", np.ones((2, 2)), 0.0)
        adv = ConstantAdversary(np.zeros((2, 2)), 10, ms)
        assert loss_value(adv, 3, np.array([0.3, -0.2]), 1) == 0.0

    def test_out_of_range(self):
        adv = ConstantAdversary(np.array([[1.5, 0.0]]), 10)
        with pytest.raises(LossOutOfRange) as exc:
            loss_value(adv, 2, np.array([1.0, 0.0]), 0)
        assert exc.value.t == 2 and exc.value.a == 0

    def test_round_outside_horizon(self):
        adv = ConstantAdversary(np.zeros((1, 2)), 5)
        with pytest.raises(IndexError):
            loss_value(adv, 6, np.zeros(2), 0)

    def test_misspec_bounded_on_random_triples(self):
        rng = np.random.default_rng(7)
        for kind in ("sign_bump", "cosine"):
            ms = make_misspec(kind, 0.1, 3, 4, rng)
            xs = SphereUniform(1.0, 4).sample_batch(rng, 100_000)
            assert np.max(np.abs(ms.value(xs))) <= 0.1 + 1e-15

    def test_obliviousness(self):
        adv = random_piecewise(3, 2, 50, 5, 1.0, np.random.default_rng(8))
        x = np.array([0.6, -0.8])
        first = [adv.losses(t, x) for t in range(1, 51)]
        again = [adv.losses(t, x) for t in range(50, 0, -1)][::-1]
        for a, b in zip(first, again):
            np.testing.assert_array_equal(a, b)

    def test_cumulative_losses(self):
        ms = MisspecSpec("cosine", np.ones((2, 2)), 0.05, 2.0)
        adv = SinusoidalDrift(np.array([[0.5, 0.1], [-0.2, 0.3]]), 0.7, 9.0, 40, ms)
        x = np.array([0.3, 0.4])
        for t in (1, 2, 17, 40):
            brute = sum(adv.losses(s, x) for s in range(1, t)) if t > 1 else np.zeros(2)
            np.testing.assert_allclose(adv.cumulative_losses(t, x), brute, atol=1e-12)


class TestAdversaries:
    def test_piecewise_segments(self):
        a, b = np.zeros((1, 1)), np.ones((1, 1)) * 0.5
        adv = PiecewiseConstant(((1, a), (4, b)), 6)
        assert [float(adv.theta(t)[0, 0]) for t in range(1, 7)] == [0, 0, 0, 0.5, 0.5, 0.5]
        np.testing.assert_array_equal(adv.theta_sequence()[:, 0, 0], [0, 0, 0, 0.5, 0.5, 0.5])

    def test_piecewise_needs_round_one(self):
        with pytest.raises(ValueError):
            PiecewiseConstant(((2, np.zeros((1, 1))),), 5)

    def test_sinusoid_sequence_matches_pointwise(self):
        adv = SinusoidalDrift(np.array([[0.5, 0.0], [0.0, -0.5], [0.3, 0.3]]), 1.0, 7.0, 30)
        seq = adv.theta_sequence()
        for t in range(1, 31):
            np.testing.assert_allclose(seq[t - 1], adv.theta(t), atol=1e-15)

    @given(st.floats(0.0, 1.0), st.floats(0.5, 50.0))
    def test_sinusoid_norm_bounded_by_base(self, amp, period):
        base = np.array([[0.6, 0.0], [0.0, -0.4]])
        adv = SinusoidalDrift(base, amp, period, 20)
        norms = np.linalg.norm(adv.theta_sequence(), axis=2)
        assert np.all(norms <= np.linalg.norm(base, axis=1) + 1e-12)


class TestValidation:
    def test_cauchy_schwarz_accepts(self):
        theta = np.array([[0.9, 0.0, 0.0]])
        ms = MisspecSpec("sign_bump", np.ones((1, 3)), 0.05)
        b = validate_adversary(ConstantAdversary(theta, 5, ms), SphereUniform(1.0, 3))
        assert b.R == pytest.approx(0.9)
        assert b.epsilon == 0.05

    def test_cauchy_schwarz_rejects(self):
        with pytest.raises(LossOutOfRange):
            validate_adversary(ConstantAdversary(np.array([[1.2, 0.0]]), 5), SphereUniform(1.0, 2))

    def test_zero_adversary(self):
        b = validate_adversary(ConstantAdversary(np.zeros((2, 2)), 5), two_points())
        assert b.R == 0.0
        np.testing.assert_allclose(b.Sigma @ b.SigmaInv, np.eye(2), atol=1e-8)

    def test_finite_support_is_exhaustive(self):
        # second segment only violates the range at one support point
        pts = np.array([[1.0, 0.0], [0.0, 1.0]])
        segs = ((1, np.array([[0.5, 0.5]])), (3, np.array([[0.5, 1.01]])))
        with pytest.raises(LossOutOfRange) as exc:
            validate_adversary(PiecewiseConstant(segs, 4), FiniteSupport(pts, np.array([0.5, 0.5])))
        assert exc.value.t == 3
        np.testing.assert_array_equal(exc.value.x, [0.0, 1.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            validate_adversary(ConstantAdversary(np.zeros((1, 3)), 5), two_points())

    @given(st.integers(1, 5), st.integers(1, 5), st.floats(0.0, 0.5), st.integers(0, 2 ** 32 - 1))
    def test_library_constructions_stay_in_range(self, K, d, eps, seed):
        rng = np.random.default_rng(seed)
        dist = random_sphere_support(d, 5, rng)
        adv = random_piecewise(K, d, 20, 3, dist.sigma, rng, make_misspec("sign_bump", eps, K, d, rng))
        env = Environment.build(dist, adv)
        for t in range(1, 21):
            assert np.max(np.abs(env.adversary.losses(t, dist.points))) <= 1 + 1e-12

    def test_scale_to_bound_only_shrinks(self):
        small = np.array([[0.1, 0.2]])
        assert scale_to_bound(small, 1.0) is small
        big = scale_to_bound(np.array([[3.0, 4.0]]), 2.0, 0.2)
        assert np.linalg.norm(big) * 2.0 + 0.2 == pytest.approx(1.0)


class TestBenchmarks:
    @pytest.mark.parametrize("name", sorted(benchmarks.BENCHMARKS))
    def test_builds_and_stays_in_range(self, name):
        env = benchmarks.build(name, 256)
        assert (env.K, env.d) == (4, 4)
        for t in range(1, 257, 17):
            assert np.max(np.abs(env.adversary.losses(t, env.distribution.points))) <= 1 + 1e-12

    def test_orthant_losses_nonnegative(self):
        env = benchmarks.orthant(512)
        for t in range(1, 513, 31):
            assert np.min(env.adversary.losses(t, env.distribution.points)) >= 0

    def test_misspecified_standard(self):
        env = benchmarks.standard(64, 0.1)
        assert env.adversary.epsilon == 0.1
        assert env.bounds.R == pytest.approx(0.9)

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            benchmarks.build("nope", 10)

    def test_signed_basis_covariance(self):
        np.testing.assert_allclose(exact_covariance(signed_basis(3, 2.0)), 4.0 / 3 * np.eye(3))
