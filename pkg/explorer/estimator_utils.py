"""
estimator_utils.py

Summary:
- Estimator roster (4 classification, 3 regression) with bounded hyper-parameter spaces.
- Categorical encoding fitted on training rows (bounded one-hot, else frequency-rank ordinal).
- fit / cv_predict: deterministic fits and out-of-fold prediction vectors.
- Fold fits run on a ThreadPoolExecutor; each fold writes a disjoint slice of the output.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Mapping, Optional, Tuple

import numpy as np
import pandas as pd

from .data_utils import Dataset, FoldPlan, Target, Task, derive_seed
from .errors import EstimatorError
from .est import (
    FEATURE_SUBSAMPLE,
    WEIGHTING,
    GradientBoostedTrees,
    KNearestNeighbors,
    LogisticRegression,
    RandomForest,
    RidgeRegression,
)

logger = logging.getLogger(__name__)

HyperParams = dict[str, Any]

ONE_HOT_CAP = 12


class EstimatorId(Enum):
    RANDOM_FOREST = "random_forest"
    GRADIENT_BOOSTED_TREES = "gradient_boosted_trees"
    LOGISTIC_REGRESSION = "logistic_regression"
    KNN = "knn"
    RANDOM_FOREST_REG = "random_forest_reg"
    RIDGE_REGRESSION = "ridge_regression"
    KNN_REG = "knn_reg"


CLASSIFICATION_ESTIMATORS: Tuple[EstimatorId, ...] = (
    EstimatorId.RANDOM_FOREST,
    EstimatorId.GRADIENT_BOOSTED_TREES,
    EstimatorId.LOGISTIC_REGRESSION,
    EstimatorId.KNN,
)
REGRESSION_ESTIMATORS: Tuple[EstimatorId, ...] = (
    EstimatorId.RANDOM_FOREST_REG,
    EstimatorId.RIDGE_REGRESSION,
    EstimatorId.KNN_REG,
)


def estimators_for(task: Task) -> Tuple[EstimatorId, ...]:
    return CLASSIFICATION_ESTIMATORS if task is Task.BINARY else REGRESSION_ESTIMATORS


def baseline_estimator(task: Task) -> EstimatorId:
    return EstimatorId.RANDOM_FOREST if task is Task.BINARY else EstimatorId.RANDOM_FOREST_REG


# ---------------------------
# Hyper-parameter spaces
# ---------------------------
@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str  # "int" | "float" | "choice"
    default: Any
    low: float = 0.0
    high: float = 0.0
    log: bool = False
    choices: Tuple[Any, ...] = ()

    def contains(self, value: Any) -> bool:
        if self.kind == "choice":
            return value in self.choices
        if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
            return False
        if self.kind == "int" and int(value) != value:
            return False
        return self.low <= value <= self.high


_FOREST_SPACE = (
    ParamSpec("n_trees", "int", 100, 10, 300),
    ParamSpec("max_depth", "int", 12, 2, 20),
    ParamSpec("min_leaf", "int", 2, 1, 20),
    ParamSpec("feature_subsample", "choice", "sqrt", choices=FEATURE_SUBSAMPLE),
)
_KNN_SPACE = (
    ParamSpec("k", "int", 5, 1, 50),
    ParamSpec("weighting", "choice", "uniform", choices=WEIGHTING),
)

PARAM_SPACES: dict[EstimatorId, Tuple[ParamSpec, ...]] = {
    EstimatorId.RANDOM_FOREST: _FOREST_SPACE,
    EstimatorId.GRADIENT_BOOSTED_TREES: (
        ParamSpec("n_rounds", "int", 100, 10, 300),
        ParamSpec("learning_rate", "float", 0.1, 0.01, 0.5),
        ParamSpec("max_depth", "int", 3, 1, 6),
    ),
    EstimatorId.LOGISTIC_REGRESSION: (
        ParamSpec("l2", "float", 1e-3, 1e-6, 10.0, log=True),
        ParamSpec("epochs", "int", 200, 50, 500),
    ),
    EstimatorId.KNN: _KNN_SPACE,
    EstimatorId.RANDOM_FOREST_REG: _FOREST_SPACE,
    EstimatorId.RIDGE_REGRESSION: (ParamSpec("l2", "float", 1.0, 1e-6, 10.0, log=True),),
    EstimatorId.KNN_REG: _KNN_SPACE,
}


def default_hyperparams(id: EstimatorId) -> HyperParams:
    return {p.name: p.default for p in PARAM_SPACES[id]}


def validate_hyperparams(id: EstimatorId, hp: Optional[Mapping[str, Any]]) -> HyperParams:
    """Fill defaults for absent keys; reject unknown keys and out-of-space values."""
    space = {p.name: p for p in PARAM_SPACES[id]}
    hp = dict(hp or {})
    unknown = set(hp) - set(space)
    if unknown:
        raise EstimatorError(f"Unknown hyper-parameters for {id.value}: {sorted(unknown)}")
    out: HyperParams = {}
    for name, spec in space.items():
        value = hp.get(name, spec.default)
        if not spec.contains(value):
            raise EstimatorError(f"{id.value}.{name}={value!r} is outside its space")
        if spec.kind == "int":
            value = int(value)
        elif spec.kind == "float":
            value = float(value)
        out[name] = value
    return out


# ---------------------------
# Encoding
# ---------------------------
class FeatureEncoder:
    """Numeric block for estimators, fitted on training rows only."""

    def fit(self, d: Dataset, rows: Optional[np.ndarray] = None) -> "FeatureEncoder":
        rows = np.arange(d.n_rows) if rows is None else rows
        self.plan: list[tuple[str, str, Any]] = []
        self.names: list[str] = []
        for col in d.columns:
            if col.is_numeric:
                self.plan.append((col.name, "numeric", None))
                self.names.append(col.name)
                continue
            counts = pd.Series(col.values[rows]).value_counts()
            if len(counts) <= ONE_HOT_CAP:
                categories = sorted(counts.index, key=str)
                self.plan.append((col.name, "onehot", categories))
                self.names.extend(f"{col.name}={c}" for c in categories)
            else:
                ranked = sorted(counts.items(), key=lambda kv: (-kv[1], str(kv[0])))
                self.plan.append((col.name, "ordinal", {k: i for i, (k, _) in enumerate(ranked)}))
                self.names.append(col.name)
        return self

    def transform(self, d: Dataset, rows: Optional[np.ndarray] = None) -> np.ndarray:
        rows = np.arange(d.n_rows) if rows is None else rows
        blocks = []
        for name, mode, info in self.plan:
            values = d.column(name).values[rows]
            if mode == "numeric":
                blocks.append(values.astype(np.float64)[:, None])
            elif mode == "onehot":
                blocks.append(np.column_stack([values == c for c in info]).astype(np.float64))
            else:
                unseen = len(info)
                blocks.append(np.array([info.get(v, unseen) for v in values], dtype=np.float64)[:, None])
        if not blocks:
            return np.zeros((len(rows), 0))
        return np.hstack(blocks)


# ---------------------------
# Fitting
# ---------------------------
@dataclass(frozen=True, eq=False)
class FittedModel:
    estimator: EstimatorId
    hyperparams: HyperParams
    task: Task
    model: Any

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.asarray(self.model.predict(X), dtype=np.float64)
        if self.task is Task.BINARY:
            out = np.clip(out, 0.0, 1.0)
        return out


@dataclass(frozen=True, eq=False)
class DatasetModel:
    """A FittedModel together with the encoder that turns dataset rows into its input block."""

    encoder: FeatureEncoder
    fitted: FittedModel

    def predict(self, d: Dataset, rows: Optional[np.ndarray] = None) -> np.ndarray:
        return self.fitted.predict(self.encoder.transform(d, rows))


def _make_model(id: EstimatorId, hp: HyperParams, seed: int):
    if id in (EstimatorId.RANDOM_FOREST, EstimatorId.RANDOM_FOREST_REG):
        return RandomForest(
            n_trees=hp["n_trees"],
            max_depth=hp["max_depth"],
            min_leaf=hp["min_leaf"],
            feature_subsample=hp["feature_subsample"],
            classification=id is EstimatorId.RANDOM_FOREST,
            seed=seed,
        )
    if id is EstimatorId.GRADIENT_BOOSTED_TREES:
        return GradientBoostedTrees(
            n_rounds=hp["n_rounds"], learning_rate=hp["learning_rate"], max_depth=hp["max_depth"], seed=seed
        )
    if id is EstimatorId.LOGISTIC_REGRESSION:
        return LogisticRegression(l2=hp["l2"], epochs=hp["epochs"])
    if id is EstimatorId.RIDGE_REGRESSION:
        return RidgeRegression(l2=hp["l2"])
    return KNearestNeighbors(k=hp["k"], weighting=hp["weighting"])


def fit(id: EstimatorId, hp: Optional[Mapping[str, Any]], X: np.ndarray, y: Target, seed: int) -> FittedModel:
    """Fit estimator `id` on a numeric feature block; deterministic given (inputs, seed)."""
    hp = validate_hyperparams(id, hp)
    if id not in estimators_for(y.task):
        raise EstimatorError(f"Estimator {id.value} does not support task {y.task.value}")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise EstimatorError(f"Empty feature block (shape {X.shape})")
    if X.shape[0] != len(y.values):
        raise EstimatorError(f"Feature block has {X.shape[0]} rows, target has {len(y.values)}")
    if y.task is Task.BINARY and len(np.unique(y.values)) < 2:
        raise EstimatorError("Single-class training target")
    model = _make_model(id, hp, seed).fit(X, y.values)
    return FittedModel(id, hp, y.task, model)


def fit_dataset(
    id: EstimatorId, hp: Optional[Mapping[str, Any]], d: Dataset, seed: int, rows: Optional[np.ndarray] = None
) -> DatasetModel:
    rows = np.arange(d.n_rows) if rows is None else rows
    encoder = FeatureEncoder().fit(d, rows)
    fitted = fit(id, hp, encoder.transform(d, rows), d.target.take(rows), seed)
    return DatasetModel(encoder, fitted)


# ---------------------------
# Out-of-fold predictions
# ---------------------------
@dataclass(frozen=True, eq=False)
class PredictionVector:
    node_id: int
    values: np.ndarray
    cv_error: float
    estimator: Optional[EstimatorId] = None
    hyperparams: Optional[HyperParams] = None

    def with_node_id(self, node_id: int) -> "PredictionVector":
        return replace(self, node_id=node_id)


def squared_error(values: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean((y - values) ** 2))


def cv_predict(
    id: EstimatorId,
    hp: Optional[Mapping[str, Any]],
    d: Dataset,
    folds: FoldPlan,
    seed: int,
    workers: int = 1,
    node_id: int = -1,
) -> PredictionVector:
    """
    Each fold is predicted by a model fitted on the other folds.
    cv_error = mean squared error of the out-of-fold values.
    """
    hp = validate_hyperparams(id, hp)
    if len(folds.assignment) != d.n_rows:
        raise EstimatorError(f"Fold plan covers {len(folds.assignment)} rows, dataset has {d.n_rows}")

    def fit_fold(fold: int):
        train = folds.train_rows(fold)
        test = folds.test_rows(fold)
        model = fit_dataset(id, hp, d, derive_seed(seed, "fold", fold), rows=train)
        logger.debug(f"{id.value} fold {fold}: train={len(train)} test={len(test)}")
        return test, model.predict(d, test)

    values = np.full(d.n_rows, np.nan)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        futures = [executor.submit(fit_fold, fold) for fold in range(folds.k)]
        for f in as_completed(futures):
            test, pred = f.result()
            values[test] = pred

    if np.isnan(values).any():
        raise EstimatorError(f"{id.value}: some rows were not predicted")
    cv_error = squared_error(values, d.target.values)
    if not math.isfinite(cv_error):
        raise EstimatorError(f"{id.value}: non-finite cross-validation error")
    return PredictionVector(node_id, values, cv_error, id, hp)
