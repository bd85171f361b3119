import numpy as np

from .linear import Standardizer

WEIGHTING = ("uniform", "inverse_distance")
_CHUNK = 512


class KNearestNeighbors:
    """
    k-NN on standardised features. Predictions average neighbour targets, so for 0/1
    targets they are positive-class probabilities. Distance ties go to the lower
    training index.
    """

    def __init__(self, k: int = 5, weighting: str = "uniform"):
        if weighting not in WEIGHTING:
            raise ValueError(f"Unknown weighting: {weighting}")
        self.k = k
        self.weighting = weighting

    def fit(self, X: np.ndarray, y: np.ndarray) -> "KNearestNeighbors":
        self.scaler = Standardizer().fit(X)
        self.train = self.scaler.transform(X)
        self.train_sq = np.einsum("ij,ij->i", self.train, self.train)
        self.y = y.astype(np.float64)
        return self

    def _predict_chunk(self, Z: np.ndarray) -> np.ndarray:
        k = min(self.k, len(self.train))
        sq = np.einsum("ij,ij->i", Z, Z)
        dist2 = np.maximum(sq[:, None] + self.train_sq[None, :] - 2.0 * Z @ self.train.T, 0.0)
        nearest = np.argsort(dist2, axis=1, kind="stable")[:, :k]
        targets = self.y[nearest]
        if self.weighting == "uniform":
            return targets.mean(axis=1)

        dist = np.sqrt(np.take_along_axis(dist2, nearest, axis=1))
        exact = dist <= 1e-12
        has_exact = exact.any(axis=1)
        weights = np.where(has_exact[:, None], exact.astype(np.float64), 1.0 / np.maximum(dist, 1e-12))
        return (weights * targets).sum(axis=1) / weights.sum(axis=1)

    def predict(self, X: np.ndarray) -> np.ndarray:
        Z = self.scaler.transform(X)
        return np.concatenate([self._predict_chunk(Z[i : i + _CHUNK]) for i in range(0, len(Z), _CHUNK)])
