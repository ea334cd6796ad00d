from .episode import (ALGORITHMS, ComparatorPolicy, LearnerConfig, RunRecord, comparator_policy, config_hash,
                      run_episode)
from .regret import (RegretCurve, exact_curve, expected_regret, expected_regret_exact, regret_grid,
                     run_replications, slope_fit)
from .verify import (BiasQuadReport, GhostSampler, PotentialReport, enumerate_mgr_expectation,
                     verify_bias_and_quadratic, verify_potential_inequality)

__all__ = [
    "ALGORITHMS", "ComparatorPolicy", "LearnerConfig", "RunRecord", "comparator_policy", "config_hash", "run_episode",
    "RegretCurve", "exact_curve", "expected_regret", "expected_regret_exact", "regret_grid", "run_replications",
    "slope_fit", "BiasQuadReport", "GhostSampler", "PotentialReport", "enumerate_mgr_expectation",
    "verify_bias_and_quadratic", "verify_potential_inequality",
]
