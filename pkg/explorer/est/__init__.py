"""
Estimator implementations (numpy only).
Every model exposes fit(X, y) -> self and predict(X) -> 1-d array.
"""

from .boosting import GradientBoostedTrees
from .forest import FEATURE_SUBSAMPLE, RandomForest
from .linear import LogisticRegression, RidgeRegression, Standardizer
from .neighbors import WEIGHTING, KNearestNeighbors

__all__ = [
    "FEATURE_SUBSAMPLE",
    "WEIGHTING",
    "GradientBoostedTrees",
    "KNearestNeighbors",
    "LogisticRegression",
    "RandomForest",
    "RidgeRegression",
    "Standardizer",
]
