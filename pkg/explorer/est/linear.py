import numpy as np
from scipy.special import expit


class Standardizer:
    """Zero mean / unit variance scaling; constant columns are only centred."""

    def fit(self, X: np.ndarray) -> "Standardizer":
        self.mean = X.mean(axis=0)
        std = X.std(axis=0)
        self.scale = np.where(std > 0.0, std, 1.0)
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale


class LogisticRegression:
    """L2-penalised logistic regression by full-batch gradient descent with a fixed step."""

    def __init__(self, l2: float = 1e-3, epochs: int = 200, step: float = 0.1):
        self.l2 = l2
        self.epochs = epochs
        self.step = step

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LogisticRegression":
        self.scaler = Standardizer().fit(X)
        Z = self.scaler.transform(X)
        n, p = Z.shape
        self.coef = np.zeros(p)
        self.intercept = 0.0
        for _ in range(self.epochs):
            residual = expit(Z @ self.coef + self.intercept) - y
            grad = Z.T @ residual / n + self.l2 * self.coef
            self.coef -= self.step * grad
            self.intercept -= self.step * float(residual.mean())
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        return expit(self.scaler.transform(X) @ self.coef + self.intercept)


class RidgeRegression:
    """Closed-form ridge on standardised inputs; the intercept is not penalised."""

    def __init__(self, l2: float = 1.0):
        self.l2 = l2

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RidgeRegression":
        self.scaler = Standardizer().fit(X)
        Z = self.scaler.transform(X)
        n, p = Z.shape
        self.intercept = float(y.mean())
        gram = Z.T @ Z + n * self.l2 * np.eye(p)
        self.coef = np.linalg.solve(gram, Z.T @ (y - self.intercept))
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.scaler.transform(X) @ self.coef + self.intercept
