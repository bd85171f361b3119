import logging
import os
import threading
from typing import Any, Sequence, Tuple

import numpy as np
import pandas as pd
import yaml

from .errors import DataError
from .estimator_utils import PredictionVector, squared_error

logger = logging.getLogger(__name__)

_lock = threading.Lock()


def _prepare(path: str):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)


def write_text(path: str, content: str):
    """Thread-safe text write; parent folders are created as needed."""
    _prepare(path)
    with _lock:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(content)


def dump_yaml(data: Any) -> str:
    return yaml.safe_dump(data, sort_keys=False, allow_unicode=True, default_flow_style=False)


def write_yaml(path: str, data: Any):
    write_text(path, dump_yaml(data))
    logger.info(f"Wrote {path}")


def read_yaml(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return yaml.safe_load(f)
    except OSError as e:
        raise DataError(f"Cannot read {path}: {e}") from e
    except yaml.YAMLError as e:
        raise DataError(f"Invalid YAML in {path}: {e}") from e


# ---------------------------
# Prediction matrix: column `y`, then one column per model
# ---------------------------
def write_prediction_matrix(path: str, y: np.ndarray, predictions: Sequence[PredictionVector]):
    frame = pd.DataFrame({"y": np.asarray(y, dtype=np.float64)})
    for p in predictions:
        frame[f"model_{p.node_id}"] = p.values
    _prepare(path)
    with _lock:
        frame.to_csv(path, index=False, float_format="%.17g")
    logger.info(f"Wrote prediction matrix {path}: {len(frame)} rows, {len(predictions)} models")


def read_prediction_matrix(path: str) -> Tuple[np.ndarray, list[PredictionVector]]:
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"Cannot read prediction matrix {path}: {e}") from e
    if frame.columns.empty or frame.columns[0] != "y":
        raise DataError(f"{path}: first column must be 'y'")
    if len(frame.columns) < 2:
        raise DataError(f"{path}: no model columns")
    try:
        values = frame.to_numpy(dtype=np.float64)
    except ValueError as e:
        raise DataError(f"{path}: non-numeric cell: {e}") from e
    if len(values) == 0 or not np.all(np.isfinite(values)):
        raise DataError(f"{path}: empty or non-finite prediction matrix")

    y = values[:, 0]
    predictions = [
        PredictionVector(j - 1, values[:, j].copy(), squared_error(values[:, j], y)) for j in range(1, values.shape[1])
    ]
    return y, predictions
