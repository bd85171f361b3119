import logging
import math
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .data_utils import Task
from .errors import DataError

logger = logging.getLogger(__name__)


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the ROC curve as the normalized Mann-Whitney U, ties counted one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if len(scores) != len(labels):
        raise DataError(f"{len(scores)} scores for {len(labels)} labels")
    positive = labels == 1
    n_pos = int(positive.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC needs both classes present")
    ranks = rankdata(scores)
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def rmse(pred: np.ndarray, y: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return float(math.sqrt(np.mean((y - pred) ** 2)))


def metric_name(task: Task) -> str:
    return "auc" if task is Task.BINARY else "rmse"


def score(task: Task, pred: np.ndarray, y: np.ndarray) -> float:
    return auc(pred, y) if task is Task.BINARY else rmse(pred, y)


def error_reduction(base_metric: float, opt_metric: float, task: Task) -> Optional[float]:
    """
    Relative drop in error: AUC error is 1 - AUC, regression error is RMSE.
    Returns None when the baseline error is zero.
    """
    if task is Task.BINARY:
        base_error, opt_error = 1.0 - base_metric, 1.0 - opt_metric
    else:
        base_error, opt_error = base_metric, opt_metric
    if base_error <= 0.0:
        logger.warning(f"Error reduction undefined: baseline error is {base_error}")
        return None
    return (base_error - opt_error) / base_error
