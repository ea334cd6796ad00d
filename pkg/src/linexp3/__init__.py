"""Exponential-weights algorithms for adversarial linear contextual bandits.

RobustLinExp3 uses an importance-weighted estimator with the known context
covariance; RealLinExp3 replaces the action covariance inverse by Matrix
Geometric Resampling.
"""

__version__ = "0.1.0"
