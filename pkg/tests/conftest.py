from typing import Optional

import numpy as np
import pytest

from explorer.config_utils import ExplorationConfig, ExplorerConfig
from explorer.data_utils import ColumnKind, Dataset, FeatureColumn, Target, Task
from explorer.estimator_utils import PredictionVector, squared_error


def numeric(name: str, values) -> FeatureColumn:
    values = np.asarray(values, dtype=np.float64)
    return FeatureColumn(name, ColumnKind.NUMERIC, values, np.zeros(len(values), dtype=bool))


def categorical(name: str, values) -> FeatureColumn:
    values = np.array([str(v) for v in values], dtype=object)
    return FeatureColumn(name, ColumnKind.CATEGORICAL, values, np.zeros(len(values), dtype=bool))


def make_dataset(columns, y, task: Task = Task.BINARY, name: str = "toy") -> Dataset:
    return Dataset(name, tuple(columns), Target(task, np.asarray(y, dtype=np.float64)))


def pv(node_id: int, values, y) -> PredictionVector:
    values = np.asarray(values, dtype=np.float64)
    return PredictionVector(node_id, values, squared_error(values, np.asarray(y, dtype=np.float64)))


def mixed_dataset(n: int = 120, seed: int = 0, task: Task = Task.BINARY) -> Dataset:
    """Two numeric columns, one integer column and one categorical; label depends on all of them."""
    rng = np.random.default_rng(seed)
    x1 = rng.normal(size=n)
    x2 = rng.uniform(-1, 1, size=n)
    count = rng.integers(0, 5, size=n).astype(np.float64)
    cat = rng.choice(["a", "b", "c"], size=n, p=[0.5, 0.3, 0.2])
    signal = x1 + 0.5 * x2 + 0.3 * count + np.where(cat == "a", 0.8, -0.4)
    if task is Task.BINARY:
        y = (signal + 0.3 * rng.normal(size=n) > np.median(signal)).astype(np.float64)
    else:
        y = signal + 0.1 * rng.normal(size=n)
    cols = [numeric("x1", x1), numeric("x2", x2), numeric("count", count), categorical("cat", cat)]
    return make_dataset(cols, y, task, name=f"mixed{seed}")


def planted_dataset(n: int = 2000, seed: int = 0) -> Dataset:
    """
    Label is a linear rule in cbrt(x1), the frequency code of `cat` and five plain gaussian columns,
    each with unit spread, while the raw data carries x1 = u**3 and the bare category labels.
    The rule is oblique in seven dimensions, so axis-aligned splits on the raw columns fall short of it.
    """
    rng = np.random.default_rng(seed)
    u = rng.normal(size=n)
    levels = [f"c{i}" for i in range(16)]
    weights = np.arange(16, 0, -1, dtype=np.float64)
    p = weights / weights.sum()
    cat = rng.choice(levels, size=n, p=p)
    freq = weights / weights.max()
    mean = float(p @ freq)
    std = float(np.sqrt(p @ (freq - mean) ** 2))
    code = dict(zip(levels, (freq - mean) / std))
    gauss = rng.normal(size=(n, 5))
    score = u + np.array([code[c] for c in cat]) + gauss.sum(axis=1) + 0.1 * rng.normal(size=n)
    y = (score > 0).astype(np.float64)
    cols = [numeric("x1", u**3), categorical("cat", cat)]
    cols += [numeric(f"x{j + 2}", gauss[:, j]) for j in range(gauss.shape[1])]
    return make_dataset(cols, y, Task.BINARY, name=f"planted{seed}")


def small_config(**exploration) -> ExplorerConfig:
    """Light settings so exploration tests stay fast."""
    return ExplorerConfig(folds=3, workers=1, exploration=ExplorationConfig(**exploration))


@pytest.fixture
def mixed() -> Dataset:
    return mixed_dataset()


@pytest.fixture
def regression() -> Dataset:
    return mixed_dataset(task=Task.REGRESSION)


def random_vectors(rng: np.random.Generator, m: int, n: int, y: Optional[np.ndarray] = None):
    y = rng.integers(0, 2, size=n).astype(np.float64) if y is None else y
    return y, [pv(i, rng.uniform(0, 1, size=n), y) for i in range(m)]
