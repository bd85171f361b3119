"""
data_utils.py

Summary:
- Typed, immutable column-major datasets (numeric / categorical columns plus a target vector).
- CSV ingestion with kind declaration or inference, load-time imputation and datetime expansion.
- Deterministic stratified holdout splitting and k-fold partitioning.
"""

import logging
import math
import os
import zlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import DataError

logger = logging.getLogger(__name__)

MISSING_TOKENS = frozenset({"", "NA", "?"})
MISSING_CATEGORY = "⟂missing⟂"
DATETIME_PARTS = ("year", "month", "dow", "hour")

# one lineage step: (transform id, source column names)
LineageStep = Tuple[str, Tuple[str, ...]]


class ColumnKind(Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"
    DATETIME = "datetime"


class Task(Enum):
    BINARY = "binary_classification"
    REGRESSION = "regression"

    @classmethod
    def parse(cls, text: str) -> "Task":
        key = text.strip().lower()
        if key in ("classification", "binary", "binary_classification"):
            return cls.BINARY
        if key == "regression":
            return cls.REGRESSION
        raise DataError(f"Unknown task: {text}")


def derive_rng(seed: int, *names: Union[str, int]) -> np.random.Generator:
    """
    Named splittable RNG: the same (seed, names) always gives the same stream,
    and different names give independent streams.
    """
    entropy = [int(seed) % (2**63)] + [zlib.crc32(str(n).encode("utf-8")) for n in names]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed: int, *names: Union[str, int]) -> int:
    return int(derive_rng(seed, *names).integers(0, 2**31 - 1))


# ---------------------------
# Types
# ---------------------------
@dataclass(frozen=True, eq=False)
class FeatureColumn:
    name: str
    kind: ColumnKind
    values: np.ndarray
    missing_mask: np.ndarray
    lineage: Tuple[LineageStep, ...] = ()

    def __post_init__(self):
        if len(self.values) != len(self.missing_mask):
            raise DataError(f"Column {self.name}: values and missing mask differ in length")
        if self.kind is ColumnKind.DATETIME:
            raise DataError(f"Column {self.name}: datetime columns must be expanded before use")
        if self.kind is ColumnKind.NUMERIC:
            present = self.values[~self.missing_mask]
            if not np.all(np.isfinite(present)):
                raise DataError(f"Column {self.name}: non-finite numeric cells")

    @property
    def is_numeric(self) -> bool:
        return self.kind is ColumnKind.NUMERIC

    def take(self, rows: np.ndarray) -> "FeatureColumn":
        return FeatureColumn(self.name, self.kind, self.values[rows], self.missing_mask[rows], self.lineage)


@dataclass(frozen=True, eq=False)
class Target:
    task: Task
    values: np.ndarray

    def __post_init__(self):
        if self.task is Task.BINARY and not np.all(np.isin(self.values, (0.0, 1.0))):
            raise DataError("Binary classification targets must be 0/1")
        if not np.all(np.isfinite(self.values)):
            raise DataError("Target values must be finite")

    def take(self, rows: np.ndarray) -> "Target":
        return Target(self.task, self.values[rows])


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    columns: Tuple[FeatureColumn, ...]
    target: Target
    has_datetime: bool = False
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        n = len(self.target.values)
        index: dict[str, int] = {}
        for i, col in enumerate(self.columns):
            if len(col.values) != n:
                raise DataError(f"Column {col.name} has {len(col.values)} rows, target has {n}")
            if col.name in index:
                raise DataError(f"Duplicate column name: {col.name}")
            index[col.name] = i
        object.__setattr__(self, "_index", index)

    @property
    def n_rows(self) -> int:
        return len(self.target.values)

    @property
    def task(self) -> Task:
        return self.target.task

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def has_column(self, name: str) -> bool:
        return name in self._index

    def column(self, name: str) -> FeatureColumn:
        try:
            return self.columns[self._index[name]]
        except KeyError:
            raise DataError(f"No such column: {name}") from None

    def numeric_columns(self) -> list[FeatureColumn]:
        return [c for c in self.columns if c.kind is ColumnKind.NUMERIC]

    def categorical_columns(self) -> list[FeatureColumn]:
        return [c for c in self.columns if c.kind is ColumnKind.CATEGORICAL]

    def take(self, rows: np.ndarray) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            self.name,
            tuple(c.take(rows) for c in self.columns),
            self.target.take(rows),
            self.has_datetime,
        )

    def with_columns(self, columns: Sequence[FeatureColumn]) -> "Dataset":
        return Dataset(self.name, tuple(columns), self.target, self.has_datetime)


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    assignment: np.ndarray

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)

    def sizes(self) -> list[int]:
        return np.bincount(self.assignment, minlength=self.k).tolist()


# ---------------------------
# Helpers: parsing
# ---------------------------
def _missing(raw: np.ndarray) -> np.ndarray:
    return np.array([str(v).strip() in MISSING_TOKENS for v in raw], dtype=bool)


def _parse_numeric(raw: np.ndarray) -> Optional[np.ndarray]:
    """Float array, or None when any cell is not a finite number."""
    cells = pd.Series(raw, dtype=object)
    if pd.to_numeric(cells, errors="coerce").isna().any():
        return None
    # float() per cell is correctly rounded, so repr() text reads back bit-exact
    try:
        parsed = cells.astype(str).str.strip().to_numpy(dtype=object).astype(np.float64)
    except ValueError:
        return None
    if not np.all(np.isfinite(parsed)):
        return None
    return parsed


def _parse_datetime(raw: np.ndarray) -> Optional[pd.DatetimeIndex]:
    try:
        parsed = pd.to_datetime(pd.Series(raw, dtype=object), format="ISO8601", errors="coerce")
    except (ValueError, TypeError):
        return None
    if parsed.isna().any():
        return None
    return pd.DatetimeIndex(parsed)


def _infer_kind(present: np.ndarray) -> ColumnKind:
    if len(present) == 0:
        return ColumnKind.CATEGORICAL
    if _parse_numeric(present) is not None:
        return ColumnKind.NUMERIC
    if _parse_datetime(present) is not None:
        return ColumnKind.DATETIME
    return ColumnKind.CATEGORICAL


def _impute_numeric(values: np.ndarray, missing: np.ndarray) -> np.ndarray:
    out = values.astype(np.float64, copy=True)
    if missing.any():
        present = out[~missing]
        out[missing] = float(np.median(present)) if len(present) else 0.0
    return out


def _numeric_column(name: str, raw: np.ndarray, missing: np.ndarray) -> FeatureColumn:
    values = np.zeros(len(raw), dtype=np.float64)
    parsed = _parse_numeric(raw[~missing])
    if parsed is None:
        raise DataError(f"Column {name} declared numeric but has unparseable cells")
    values[~missing] = parsed
    return FeatureColumn(name, ColumnKind.NUMERIC, _impute_numeric(values, missing), missing)


def _categorical_column(name: str, raw: np.ndarray, missing: np.ndarray) -> FeatureColumn:
    values = np.array([str(v) for v in raw], dtype=object)
    values[missing] = MISSING_CATEGORY
    return FeatureColumn(name, ColumnKind.CATEGORICAL, values, missing)


def _datetime_columns(name: str, raw: np.ndarray, missing: np.ndarray) -> list[FeatureColumn]:
    stamps = _parse_datetime(raw[~missing])
    if stamps is None:
        raise DataError(f"Column {name} declared datetime but has unparseable cells")
    parts = {
        "year": stamps.year,
        "month": stamps.month,
        "dow": stamps.dayofweek,
        "hour": stamps.hour,
    }
    out = []
    for part in DATETIME_PARTS:
        values = np.zeros(len(raw), dtype=np.float64)
        values[~missing] = np.asarray(parts[part], dtype=np.float64)
        out.append(FeatureColumn(f"{name}_{part}", ColumnKind.NUMERIC, _impute_numeric(values, missing), missing))
    return out


def _parse_target(raw: np.ndarray, task: Optional[Task], name: str) -> Target:
    if _missing(raw).any():
        raise DataError(f"Unparseable target: column {name} has missing cells")
    numeric = _parse_numeric(raw)
    if numeric is not None:
        binary = bool(np.all(np.isin(numeric, (0.0, 1.0))))
        if task is None:
            task = Task.BINARY if binary else Task.REGRESSION
        if task is Task.BINARY and not binary:
            raise DataError(f"Unparseable target: column {name} is not 0/1 for classification")
        return Target(task, numeric)

    labels = sorted({str(v).strip() for v in raw})
    if task is Task.REGRESSION or len(labels) != 2:
        raise DataError(f"Unparseable target: column {name}")
    # two string labels -> 0/1 in sorted order
    mapped = np.array([labels.index(str(v).strip()) for v in raw], dtype=np.float64)
    return Target(Task.BINARY, mapped)


# ---------------------------
# Loading / writing
# ---------------------------
def load_csv(
    path: str,
    target_name: str,
    declared_kinds: Optional[Mapping[str, ColumnKind]] = None,
    task: Optional[Task] = None,
    name: Optional[str] = None,
) -> Dataset:
    """
    Load a UTF-8 CSV with a header row into a Dataset.
    Columns are typed by declaration or inference (numeric, then ISO-8601 datetime,
    else categorical); missing cells ("", "NA", "?") are imputed at load.
    """
    if not os.path.exists(path):
        raise DataError(f"Data file not found: {path}")
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False, encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        raise DataError(f"No header row in {path}") from e
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DataError(f"Cannot parse CSV {path}: {e}") from e

    if target_name not in df.columns:
        raise DataError(f"Missing target column '{target_name}' in {path}")
    if len(df) == 0:
        raise DataError(f"No data rows in {path}")

    declared_kinds = dict(declared_kinds or {})
    unknown = set(declared_kinds) - set(df.columns)
    if unknown:
        raise DataError(f"Kind declared for unknown columns: {sorted(unknown)}")

    target = _parse_target(df[target_name].to_numpy(dtype=object), task, target_name)

    columns: list[FeatureColumn] = []
    has_datetime = False
    for col in df.columns:
        if col == target_name:
            continue
        raw = df[col].to_numpy(dtype=object)
        missing = _missing(raw)
        kind = declared_kinds.get(col) or _infer_kind(raw[~missing])
        if kind is ColumnKind.NUMERIC:
            columns.append(_numeric_column(col, raw, missing))
        elif kind is ColumnKind.DATETIME:
            columns.extend(_datetime_columns(col, raw, missing))
            has_datetime = True
        else:
            columns.append(_categorical_column(col, raw, missing))

    dataset = Dataset(name or os.path.splitext(os.path.basename(path))[0], tuple(columns), target, has_datetime)
    logger.info(
        f"Loaded {dataset.name}: rows={dataset.n_rows}, numeric={len(dataset.numeric_columns())}, "
        f"categorical={len(dataset.categorical_columns())}, datetime={has_datetime}, task={target.task.value}"
    )
    return dataset


def write_csv(d: Dataset, path: str, target_name: str = "y"):
    """Inverse of load_csv: missing cells are written as empty strings."""
    data: dict[str, list[str]] = {}
    for col in d.columns:
        if col.is_numeric:
            cells = [repr(float(v)) for v in col.values]
        else:
            cells = [str(v) for v in col.values]
        data[col.name] = ["" if m else c for c, m in zip(cells, col.missing_mask)]
    if d.task is Task.BINARY:
        data[target_name] = [str(int(v)) for v in d.target.values]
    else:
        data[target_name] = [repr(float(v)) for v in d.target.values]
    pd.DataFrame(data, dtype=object).to_csv(path, index=False, encoding="utf-8")


# ---------------------------
# Splitting
# ---------------------------
def _largest_remainder(total: int, counts: Sequence[int]) -> list[int]:
    n = sum(counts)
    raw = [total * c / n for c in counts]
    quotas = [int(math.floor(r)) for r in raw]
    order = sorted(range(len(counts)), key=lambda i: (-(raw[i] - quotas[i]), i))
    for i in order[: total - sum(quotas)]:
        quotas[i] += 1
    return quotas


def holdout_split(d: Dataset, fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """Deterministic (stratified for classification) split into (train, test)."""
    if not 0.0 < fraction < 1.0:
        raise DataError(f"Holdout fraction must be in (0, 1), got {fraction}")
    n = d.n_rows
    if n < 10:
        raise DataError(f"Holdout split needs at least 10 rows, got {n}")
    n_test = int(math.floor(fraction * n + 0.5))
    if not 0 < n_test < n:
        raise DataError(f"Holdout fraction {fraction} leaves an empty side on {n} rows")

    rng = derive_rng(seed, "holdout")
    if d.task is Task.BINARY:
        groups = [np.flatnonzero(d.target.values == c) for c in (0.0, 1.0)]
        quotas = _largest_remainder(n_test, [len(g) for g in groups])
        test_parts = []
        for g, q in zip(groups, quotas):
            if len(g) - q <= 0:
                raise DataError("Holdout split leaves a class empty in train")
            test_parts.append(rng.permutation(g)[:q])
        test_rows = np.sort(np.concatenate(test_parts))
    else:
        test_rows = np.sort(rng.permutation(n)[:n_test])

    train_mask = np.ones(n, dtype=bool)
    train_mask[test_rows] = False
    train, test = d.take(np.flatnonzero(train_mask)), d.take(test_rows)
    logger.info(f"Holdout split: train={train.n_rows}, test={test.n_rows} (fraction={fraction}, seed={seed})")
    return train, test


def make_folds(d: Dataset, k: int, seed: int) -> FoldPlan:
    """Round-robin fold assignment over a shuffled (class-blocked) order."""
    n = d.n_rows
    if k < 2:
        raise DataError(f"Fold count must be >= 2, got {k}")
    if n < k:
        raise DataError(f"Cannot make {k} folds from {n} rows")

    rng = derive_rng(seed, "folds")
    if d.task is Task.BINARY:
        groups = [np.flatnonzero(d.target.values == c) for c in (0.0, 1.0)]
        for c, g in enumerate(groups):
            if len(g) < k:
                raise DataError(f"Class {c} has {len(g)} rows, fewer than {k} folds")
        order = np.concatenate([rng.permutation(g) for g in groups])
    else:
        order = rng.permutation(n)

    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.arange(n) % k
    return FoldPlan(k, assignment)
