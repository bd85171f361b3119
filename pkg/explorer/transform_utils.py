"""
transform_utils.py

Summary:
- Catalog of 9 feature transformations plus feature selection.
- fit_apply learns parameters from training rows only and appends the new columns
  (feature selection removes columns instead).
- replay rebuilds the same columns on any rows from the fitted parameters alone.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.special import expit

from .config_utils import TransformConfig
from .data_utils import ColumnKind, Dataset, FeatureColumn, derive_rng
from .errors import TransformError

logger = logging.getLogger(__name__)


class TransformId(Enum):
    FREQ = "freq"
    PCA = "pca"
    ROUND = "round"
    MINMAXSCALER = "minmaxscaler"
    TANH = "tanh"
    GROUPBY_STDDEV = "groupby_stddev"
    CBRT = "cbrt"
    SIGMOID = "sigmoid"
    STDSCALER = "stdscaler"
    FEATURE_SELECTION = "feature_selection"


TRANSFORM_CATALOG: Tuple[TransformId, ...] = tuple(TransformId)

_ELEMENTWISE: dict[TransformId, Callable[[np.ndarray], np.ndarray]] = {
    TransformId.ROUND: np.round,
    TransformId.TANH: np.tanh,
    TransformId.CBRT: np.cbrt,
    TransformId.SIGMOID: expit,
}


@dataclass(frozen=True, eq=False)
class ColumnRecipe:
    """How one new column is built: its name, source columns and fitted parameters."""

    name: str
    sources: Tuple[str, ...]
    params: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class TransformSpec:
    id: TransformId
    recipes: Tuple[ColumnRecipe, ...] = ()
    kept_columns: Tuple[str, ...] = ()
    noop: bool = False

    @property
    def source_columns(self) -> Tuple[str, ...]:
        if self.id is TransformId.FEATURE_SELECTION:
            return self.kept_columns
        seen: dict[str, None] = {}
        for r in self.recipes:
            for s in r.sources:
                seen.setdefault(s, None)
        return tuple(seen)

    @property
    def output_columns(self) -> Tuple[str, ...]:
        if self.id is TransformId.FEATURE_SELECTION:
            return self.kept_columns
        return tuple(r.name for r in self.recipes)

    def describe(self) -> str:
        if self.noop:
            return f"{self.id.value} (no-op)"
        return f"{self.id.value} -> {', '.join(self.output_columns)}"


# ---------------------------
# Applicability
# ---------------------------
def _is_integer_valued(col: FeatureColumn, rows: Optional[np.ndarray] = None) -> bool:
    if not col.is_numeric:
        return False
    values = col.values if rows is None else col.values[rows]
    return bool(np.all(values == np.round(values)))


def applicable(d: Dataset, id: TransformId, rows: Optional[np.ndarray] = None) -> bool:
    """Whether `id` has at least one input column (or pair); value checks look at `rows` only when given."""
    numeric = d.numeric_columns()
    categorical = d.categorical_columns()
    if id is TransformId.FREQ:
        return bool(categorical) or any(_is_integer_valued(c, rows) for c in numeric)
    if id is TransformId.PCA:
        return len(numeric) >= 2
    if id is TransformId.GROUPBY_STDDEV:
        return bool(categorical) and bool(numeric)
    if id is TransformId.FEATURE_SELECTION:
        return len(d.columns) >= 2
    return len(numeric) >= 1


# ---------------------------
# Column construction (shared by fit and replay)
# ---------------------------
def _compute(id: TransformId, recipe: ColumnRecipe, d: Dataset) -> np.ndarray:
    for s in recipe.sources:
        if not d.has_column(s):
            raise TransformError(f"Missing source column '{s}' for {id.value} column '{recipe.name}'")
    p = recipe.params

    if id is TransformId.FREQ:
        counts = p["counts"]
        return np.array([counts.get(v, 0) for v in d.column(recipe.sources[0]).values], dtype=np.float64)
    if id is TransformId.GROUPBY_STDDEV:
        key, value = recipe.sources
        stddev = p["stddev"]
        return np.array([stddev.get(k, 0.0) for k in d.column(key).values], dtype=np.float64)
    if id is TransformId.PCA:
        block = np.column_stack([d.column(s).values for s in recipe.sources])
        return ((block - p["mean"]) / p["scale"]) @ p["loading"]

    x = d.column(recipe.sources[0]).values
    if id is TransformId.MINMAXSCALER:
        return (x - p["min"]) / (p["max"] - p["min"])
    if id is TransformId.STDSCALER:
        return (x - p["mean"]) / p["std"]
    return _ELEMENTWISE[id](x)


def _lineage(d: Dataset, id: TransformId, sources: Tuple[str, ...]):
    base = max((d.column(s).lineage for s in sources), key=len, default=())
    return base + ((id.value, sources),)


def _unique_name(base: str, taken: set[str]) -> str:
    if base not in taken:
        return base
    i = 1
    while f"{base}.{i}" in taken:
        i += 1
    return f"{base}.{i}"


# ---------------------------
# Fitting
# ---------------------------
def _fit_freq(d: Dataset, train: np.ndarray, config: TransformConfig) -> list[ColumnRecipe]:
    recipes = []
    for col in d.columns:
        values = col.values[train]
        if col.is_numeric:
            if not _is_integer_valued(col, train) or len(np.unique(values)) > config.freq_distinct_cap:
                continue
            values = values.astype(np.float64)
        counts = pd.Series(values).value_counts(sort=False)
        if len(counts) < 2:
            continue
        params = {"counts": {(float(k) if col.is_numeric else k): int(v) for k, v in counts.items()}}
        recipes.append(ColumnRecipe(f"{col.name}~freq", (col.name,), params))
    return recipes


def _fit_unary(d: Dataset, id: TransformId, train: np.ndarray) -> list[ColumnRecipe]:
    recipes = []
    for col in d.numeric_columns():
        x = col.values[train]
        params: dict[str, Any] = {}
        if id is TransformId.MINMAXSCALER:
            lo, hi = float(x.min()), float(x.max())
            if hi == lo:
                continue
            params = {"min": lo, "max": hi}
        elif id is TransformId.STDSCALER:
            mu, sigma = float(x.mean()), float(x.std())
            if sigma == 0.0:
                continue
            params = {"mean": mu, "std": sigma}
        recipes.append(ColumnRecipe(f"{col.name}~{id.value}", (col.name,), params))
    return recipes


def _principal_axes(cov: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """Top-k eigenvectors by power iteration with deflation."""
    rng = derive_rng(seed, "pca")
    work = cov.copy()
    axes: list[np.ndarray] = []

    def orthogonalize(v: np.ndarray) -> np.ndarray:
        for a in axes:
            v = v - (a @ v) * a
        return v

    for _ in range(k):
        v = orthogonalize(rng.standard_normal(cov.shape[0]))
        norm = np.linalg.norm(v)
        if norm < 1e-12:
            break
        v /= norm
        for _ in range(2000):
            w = orthogonalize(work @ v)
            norm = np.linalg.norm(w)
            if norm < 1e-12:
                break
            w /= norm
            converged = np.linalg.norm(w - v) < 1e-10
            v = w
            if converged:
                break
        eigenvalue = float(v @ cov @ v)
        if eigenvalue <= 1e-10:
            break
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        axes.append(v)
        work = work - eigenvalue * np.outer(v, v)
    return axes


def _fit_pca(d: Dataset, train: np.ndarray, config: TransformConfig) -> list[ColumnRecipe]:
    block_cols = [c for c in d.numeric_columns() if c.values[train].std() > 0.0]
    if len(block_cols) < 2:
        return []
    names = tuple(c.name for c in block_cols)
    block = np.column_stack([c.values[train] for c in block_cols])
    mean = block.mean(axis=0)
    scale = block.std(axis=0)
    z = (block - mean) / scale
    cov = z.T @ z / max(len(z) - 1, 1)
    k = min(config.pca_k, len(block_cols))

    taken = set(d.column_names)
    recipes = []
    for i, axis in enumerate(_principal_axes(cov, k, seed=0)):
        name = _unique_name(f"pc{i}~pca", taken)
        taken.add(name)
        recipes.append(ColumnRecipe(name, names, {"mean": mean, "scale": scale, "loading": axis}))
    return recipes


def _fit_groupby_stddev(d: Dataset, train: np.ndarray, config: TransformConfig) -> list[ColumnRecipe]:
    keys = []
    for col in d.categorical_columns():
        n_groups = len(np.unique(col.values[train]))
        if 2 <= n_groups <= config.groupby_key_cap:
            keys.append(col)

    scored = []
    for ki, key in enumerate(keys):
        key_train = key.values[train]
        for vi, value in enumerate(d.numeric_columns()):
            grouped = pd.Series(value.values[train]).groupby(key_train).std(ddof=0).fillna(0.0)
            stddev = {k: float(v) for k, v in grouped.items()}
            recipe = ColumnRecipe(f"{value.name}@{key.name}~groupby_stddev", (key.name, value.name), {"stddev": stddev})
            score = float(_compute(TransformId.GROUPBY_STDDEV, recipe, d)[train].var())
            if score > 1e-12:
                scored.append((-score, ki, vi, recipe))
    scored.sort(key=lambda t: t[:3])
    return [t[3] for t in scored[: config.groupby_pair_cap]]


def _ordinal_by_frequency(values: np.ndarray, train: np.ndarray) -> np.ndarray:
    counts = pd.Series(values[train]).value_counts()
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], str(kv[0])))
    rank = {k: i for i, (k, _) in enumerate(ranked)}
    return np.array([rank.get(v, len(rank)) for v in values], dtype=np.float64)


def _abs_correlation(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        return 0.0
    return abs(float(xc @ yc) / denom)


def _fit_selection(d: Dataset, train: np.ndarray, config: TransformConfig) -> Tuple[str, ...]:
    y = d.target.values[train]
    scores = []
    for i, col in enumerate(d.columns):
        x = col.values[train] if col.is_numeric else _ordinal_by_frequency(col.values, train)[train]
        scores.append((-_abs_correlation(x, y), i))
    keep = max(1, int(math.ceil(config.selection_keep_fraction * len(d.columns))))
    if keep >= len(d.columns):
        return ()
    chosen = sorted(i for _, i in sorted(scores)[:keep])
    return tuple(d.columns[i].name for i in chosen)


def _build_columns(d: Dataset, spec: TransformSpec) -> list[FeatureColumn]:
    new_cols = []
    for recipe in spec.recipes:
        values = _compute(spec.id, recipe, d)
        # overflow on rows the fit never saw: flag as missing
        missing = ~np.isfinite(values)
        values = np.where(missing, 0.0, values)
        new_cols.append(
            FeatureColumn(recipe.name, ColumnKind.NUMERIC, values, missing, _lineage(d, spec.id, recipe.sources))
        )
    return new_cols


def fit_apply(
    d: Dataset, id: TransformId, train_mask: np.ndarray, config: Optional[TransformConfig] = None
) -> Tuple[Dataset, TransformSpec]:
    """
    Fit transform `id` on the rows flagged in train_mask and apply it to all rows.
    Degenerate candidate columns are skipped; when nothing is left the result is
    the input dataset with a no-op spec.
    """
    config = config or TransformConfig()
    train_mask = np.asarray(train_mask, dtype=bool)
    if len(train_mask) != d.n_rows:
        raise TransformError(f"Train mask has {len(train_mask)} entries, dataset has {d.n_rows} rows")
    if not train_mask.any():
        raise TransformError("Train mask selects no rows")
    train = np.flatnonzero(train_mask)
    if not applicable(d, id, train):
        raise TransformError(f"Transform {id.value} is not applicable to {d.name}")

    if id is TransformId.FEATURE_SELECTION:
        kept = _fit_selection(d, train, config)
        if not kept:
            logger.warning(f"{id.value} would keep every column; no-op")
            return d, TransformSpec(id, noop=True)
        spec = TransformSpec(id, kept_columns=kept)
        return replay(spec, d), spec

    if id is TransformId.FREQ:
        candidates = _fit_freq(d, train, config)
    elif id is TransformId.PCA:
        candidates = _fit_pca(d, train, config)
    elif id is TransformId.GROUPBY_STDDEV:
        candidates = _fit_groupby_stddev(d, train, config)
    else:
        candidates = _fit_unary(d, id, train)

    # drop columns that already exist or carry no information on the training rows
    recipes = []
    for recipe in candidates:
        if d.has_column(recipe.name):
            continue
        train_values = _compute(id, recipe, d)[train]
        if not np.all(np.isfinite(train_values)):
            continue
        if train_values.max() == train_values.min():
            continue
        if len(recipe.sources) == 1 and np.array_equal(train_values, d.column(recipe.sources[0]).values[train]):
            continue
        recipes.append(recipe)

    if not recipes:
        logger.warning(f"{id.value} produced no usable column on {d.name}; no-op")
        return d, TransformSpec(id, noop=True)

    spec = TransformSpec(id, recipes=tuple(recipes))
    out = d.with_columns(list(d.columns) + _build_columns(d, spec))
    logger.debug(f"{id.value}: +{len(recipes)} columns ({len(out.columns)} total)")
    return out, spec


def replay(spec: TransformSpec, d: Dataset) -> Dataset:
    """Rebuild the columns of a fitted spec on `d` using its fitted parameters only."""
    if spec.noop:
        return d
    if spec.id is TransformId.FEATURE_SELECTION:
        missing = [n for n in spec.kept_columns if not d.has_column(n)]
        if missing:
            raise TransformError(f"Missing source columns for feature selection: {missing}")
        return d.with_columns([d.column(n) for n in spec.kept_columns])
    return d.with_columns(list(d.columns) + _build_columns(d, spec))


def replay_chain(chain: list[TransformSpec], d: Dataset) -> Dataset:
    for spec in chain:
        d = replay(spec, d)
    return d
