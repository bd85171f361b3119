import numpy as np
from scipy.special import expit, logit

from .tree import BinMapper, Tree, build_tree


class GradientBoostedTrees:
    """
    Binary classifier: regression trees fitted to the logistic-loss gradient with
    Newton leaf values; the probability is the sigmoid of the summed scores.
    """

    def __init__(
        self,
        n_rounds: int = 100,
        learning_rate: float = 0.1,
        max_depth: int = 3,
        min_leaf: int = 1,
        leaf_reg: float = 1.0,
        seed: int = 0,
    ):
        self.n_rounds = n_rounds
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.leaf_reg = leaf_reg
        self.seed = seed
        self.base_score = 0.0
        self.trees: list[Tree] = []

    def fit(self, X: np.ndarray, y: np.ndarray) -> "GradientBoostedTrees":
        mapper = BinMapper().fit(X)
        binned = mapper.transform(X)
        rng = np.random.default_rng(self.seed)
        rows = np.arange(len(X))
        self.base_score = float(logit(np.clip(y.mean(), 1e-6, 1 - 1e-6)))
        score = np.full(len(X), self.base_score)
        self.trees = []
        for _ in range(self.n_rounds):
            p = expit(score)
            tree = build_tree(
                binned,
                mapper,
                y - p,
                rows,
                criterion="variance",
                max_depth=self.max_depth,
                min_leaf=self.min_leaf,
                max_features=X.shape[1],
                rng=rng,
                hess=p * (1.0 - p),
                leaf_reg=self.leaf_reg,
            )
            self.trees.append(tree)
            score += self.learning_rate * tree.predict(X)
        return self

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        score = np.full(len(X), self.base_score)
        for tree in self.trees:
            score += self.learning_rate * tree.predict(X)
        return score

    def predict(self, X: np.ndarray) -> np.ndarray:
        return expit(self.decision_function(X))
