import math

import numpy as np

from .tree import BinMapper, Tree, build_tree

FEATURE_SUBSAMPLE = ("sqrt", "all", "half")


def features_per_split(rule: str, n_features: int) -> int:
    if rule == "sqrt":
        return max(1, int(math.sqrt(n_features)))
    if rule == "half":
        return max(1, n_features // 2)
    if rule == "all":
        return n_features
    raise ValueError(f"Unknown feature_subsample rule: {rule}")


class RandomForest:
    """Bagged histogram trees; Gini splits for 0/1 targets, variance splits otherwise."""

    def __init__(
        self,
        n_trees: int = 100,
        max_depth: int = 12,
        min_leaf: int = 2,
        feature_subsample: str = "sqrt",
        classification: bool = True,
        seed: int = 0,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.feature_subsample = feature_subsample
        self.classification = classification
        self.seed = seed
        self.trees: list[Tree] = []

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RandomForest":
        mapper = BinMapper().fit(X)
        binned = mapper.transform(X)
        rng = np.random.default_rng(self.seed)
        n = len(X)
        q = features_per_split(self.feature_subsample, X.shape[1])
        criterion = "gini" if self.classification else "variance"
        self.trees = []
        for _ in range(self.n_trees):
            rows = rng.integers(0, n, n)
            tree = build_tree(
                binned,
                mapper,
                y,
                rows,
                criterion=criterion,
                max_depth=self.max_depth,
                min_leaf=self.min_leaf,
                max_features=q,
                rng=rng,
            )
            self.trees.append(tree)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros(len(X))
        for tree in self.trees:
            out += tree.predict(X)
        return out / len(self.trees)
