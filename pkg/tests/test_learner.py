import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from linexp3.errors import NonFiniteEstimate
from linexp3.learner import (Robust, Uniform, LearnerState, counterfactual_weights, draw_action_from_uniform,
                             fullinfo_estimate, mixed_softmax, policy_probs, real_estimate, robust_estimate,
                             robust_estimates, tune_counterfactual, tune_fullinfo, tune_real, tune_robust, update)
from linexp3.mgr import MgrConfig
from linexp3.learner import RealMGR


def state_with(cum, eta, gamma):
    cum = np.asarray(cum, dtype=float)
    return LearnerState(cum, eta, gamma, Robust(np.eye(cum.shape[1])))


class TestPolicy:
    def test_zero_history_is_uniform(self):
        st_ = LearnerState.initial(3, 2, 0.5, 0.1, Robust(np.eye(2)))
        np.testing.assert_allclose(policy_probs(st_, np.array([0.3, 0.4])), np.full(3, 1 / 3))

    def test_single_arm(self):
        np.testing.assert_array_equal(policy_probs(state_with([[5.0]], 1.0, 0.2), np.array([1.0])), [1.0])

    def test_two_arm_example(self):
        # scores -eta <x, cum> = (0, -log 3) with eta = 1: softmax (3/4, 1/4)
        p = policy_probs(state_with([[0.0], [math.log(3)]], 1.0, 0.2), np.array([1.0]))
        np.testing.assert_allclose(p, [0.8 * 0.75 + 0.1, 0.8 * 0.25 + 0.1], atol=1e-15)

    def test_full_exploration(self):
        p = policy_probs(state_with([[1.0], [-4.0]], 3.0, 1.0), np.array([1.0]))
        np.testing.assert_allclose(p, [0.5, 0.5])

    def test_large_scores_do_not_overflow(self):
        p = mixed_softmax(np.array([1e5, 0.0, -1e5]), 0.0)
        np.testing.assert_allclose(p, [1.0, 0.0, 0.0])

    def test_batch_matches_single(self):
        rng = np.random.default_rng(0)
        s = state_with(rng.standard_normal((4, 3)), 0.7, 0.1)
        xs = rng.standard_normal((5, 3))
        batch = policy_probs(s, xs)
        for i in range(5):
            np.testing.assert_allclose(batch[i], policy_probs(s, xs[i]), atol=1e-15)

    def test_uniform_estimator(self):
        s = LearnerState.initial(4, 2, 0.0, 1.0, Uniform())
        np.testing.assert_array_equal(policy_probs(s, np.ones((3, 2))), np.full((3, 4), 0.25))

    @given(arrays(np.float64, 5, elements=st.floats(-50, 50)), st.floats(-100, 100), st.floats(0.0, 1.0))
    def test_shift_invariance(self, scores, shift, gamma):
        np.testing.assert_allclose(mixed_softmax(scores, gamma), mixed_softmax(scores + shift, gamma), atol=1e-12)

    @given(arrays(np.float64, 4, elements=st.floats(-300, 300)), st.floats(0.0, 1.0))
    def test_floor_and_normalisation(self, scores, gamma):
        p = mixed_softmax(scores, gamma)
        assert abs(p.sum() - 1.0) <= 1e-12
        assert np.all(p >= gamma / 4 - 1e-15)


class TestDrawAction:
    def test_thresholds(self):
        p = np.array([0.7, 0.3])
        assert draw_action_from_uniform(p, 0.69) == 0
        assert draw_action_from_uniform(p, 0.71) == 1

    def test_boundary_goes_to_next_arm(self):
        assert draw_action_from_uniform(np.array([0.5, 0.5]), 0.5) == 1

    def test_rounding_past_total(self):
        p = np.array([0.3, 0.3, 0.3999999999])
        assert draw_action_from_uniform(p, 0.99999999999) == 2


class TestEstimators:
    def test_robust(self):
        sinv = np.diag([2.0, 2.0])
        np.testing.assert_allclose(robust_estimate(sinv, np.array([1.0, 0.0]), 0, 0.5, 0.4, 0), [1.6, 0.0])
        np.testing.assert_array_equal(robust_estimate(sinv, np.array([1.0, 0.0]), 0, 0.5, 0.4, 1), [0.0, 0.0])

    def test_robust_all_arms(self):
        out = robust_estimates(np.eye(2), np.array([0.0, 1.0]), 1, 0.25, 0.5, 3)
        np.testing.assert_array_equal(out, [[0, 0], [0, 2.0], [0, 0]])

    def test_real_vector_and_matrix_forms(self):
        sp = np.array([[0.75, 0.1], [0.0, 1.0]])
        x = np.array([0.6, 0.8])
        np.testing.assert_allclose(real_estimate(sp, x, 0, 0.5, 0), 0.5 * sp @ x)
        np.testing.assert_allclose(real_estimate(sp @ x, x, 0, 0.5, 0), 0.5 * sp @ x)
        np.testing.assert_array_equal(real_estimate(sp, x, 0, 0.5, 1), [0.0, 0.0])

    def test_fullinfo(self):
        out = fullinfo_estimate(np.diag([2.0, 1.0]), np.array([1.0, 1.0]), [0.5, -0.25])
        np.testing.assert_allclose(out, [[1.0, 0.5], [-0.5, -0.25]])

    def test_counterfactual(self):
        # cumulative losses (0, log 2) at eta = 1 give weights (2/3, 1/3)
        oracle = lambda s, x, a: [0.0, math.log(2)][a]
        np.testing.assert_allclose(counterfactual_weights(oracle, 2, np.zeros(1), 1.0, 2), [2 / 3, 1 / 3])
        np.testing.assert_allclose(counterfactual_weights(oracle, 1, np.zeros(1), 1.0, 2), [0.5, 0.5])

    def test_update_accumulates(self):
        s = LearnerState.initial(2, 2, 0.1, 0.1, Robust(np.eye(2)))
        s = update(s, np.array([[1.6, 0.0], [0.0, 0.0]]))
        s = update(s, np.array([[0.0, 0.0], [0.0, -1.0]]))
        np.testing.assert_array_equal(s.cum_estimates, [[1.6, 0.0], [0.0, -1.0]])
        assert s.round == 3

    def test_update_rejects_non_finite(self):
        s = LearnerState.initial(1, 1, 0.1, 0.1, Robust(np.eye(1)))
        with pytest.raises(NonFiniteEstimate):
            update(s, np.array([[np.inf]]))

    def test_real_mode_validated(self):
        with pytest.raises(ValueError):
            RealMGR(MgrConfig(0.5, 3), "slow")


class TestTuning:
    def test_robust(self):
        tp = tune_robust(1000, 2, 2, 1.0, 0.5)
        assert tp.eta == pytest.approx(0.004933975366864894, rel=1e-12)
        assert tp.gamma == pytest.approx(0.14048452394288696, rel=1e-12)
        assert not tp.clamped["eta"] and not tp.clamped["gamma"]

    def test_robust_eta_cap(self):
        tp = tune_robust(1000, 2, 2, 1.0, 0.01)
        assert tp.clamped["eta"]
        assert tp.eta == pytest.approx(tp.gamma * 0.01 / 2)

    def test_robust_gamma_clamp(self):
        tp = tune_robust(5, 4, 4, 1.0, 0.25)
        assert tp.gamma == 0.99 and tp.clamped["gamma"]
        assert tp.warnings

    def test_real(self):
        tp = tune_real(10_000, 2, 2, 1.0, 1.0, 0.25)
        assert tp.gamma == pytest.approx(0.03034854258770293, rel=1e-12)
        assert tp.M == 2428
        assert tp.beta == 0.5
        assert tp.clamped["eta"]
        assert tp.eta == pytest.approx(0.0008233841086867024, rel=1e-12)

    def test_real_beta_scales_with_sigma(self):
        assert tune_real(10_000, 2, 2, 2.0, 0.5, 1.0).beta == 0.125

    def test_real_log_clamp(self):
        tp = tune_real(2, 2, 2, 1.0, 0.5, 0.5)
        assert tp.clamped["log"]

    def test_fullinfo(self):
        tp = tune_fullinfo(400, 2, 2, 1.0, 1.0)
        assert tp.eta == pytest.approx(math.sqrt(2 * math.log(2) / 400))
        assert tp.gamma == 0.0
        assert tune_fullinfo(4, 2, 2, 1.0, 0.1).eta == pytest.approx(0.1)

    def test_counterfactual(self):
        assert tune_counterfactual(800, 4).eta == pytest.approx(math.sqrt(8 * math.log(4) / 800))

    def test_single_arm_warns(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            tune_counterfactual(100, 1)
        assert caught
