"""
ensemble_utils.py

Summary:
- Ensemble generalization error E = E_bar - A_bar for equally weighted members.
- Running sums (row_sum, row_sumsq, sum_member_error) give O(n_rows) add / probe / remove.
- greedy_select: forward selection with optional phi slack and a one-pass drop step.
- brute_force_select: exact subset search used as an oracle for small candidate sets.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .data_utils import Target
from .errors import EnsembleError
from .estimator_utils import PredictionVector, squared_error

logger = logging.getLogger(__name__)

BRUTE_FORCE_CAP = 20
TIE_TOLERANCE = 1e-12

Labels = Union[Target, np.ndarray]


@dataclass(frozen=True)
class EgeValue:
    E: float
    E_bar: float
    A_bar: float


EMPTY_VALUE = EgeValue(math.inf, math.inf, 0.0)


def _labels(y: Labels) -> np.ndarray:
    return np.asarray(y.values if isinstance(y, Target) else y, dtype=np.float64)


def _check_length(p: PredictionVector, y: np.ndarray):
    if len(p.values) != len(y):
        raise EnsembleError(f"Prediction vector {p.node_id} has {len(p.values)} rows, target has {len(y)}")


def _value(m: int, row_sum: np.ndarray, row_sumsq: np.ndarray, sum_member_error: float) -> EgeValue:
    if m == 0:
        return EMPTY_VALUE
    mean = row_sum / m
    e_bar = sum_member_error / m
    a_bar = max(0.0, float(np.mean(row_sumsq / m - mean * mean)))
    return EgeValue(e_bar - a_bar, e_bar, a_bar)


def ege(members: Iterable[PredictionVector], y: Labels) -> EgeValue:
    members = list(members)
    if not members:
        raise EnsembleError("Ensemble error of an empty member set")
    y = _labels(y)
    for p in members:
        _check_length(p, y)
    V = np.stack([p.values for p in members])
    member_errors = np.mean((y[None, :] - V) ** 2, axis=1)
    e_bar = float(np.mean(member_errors))
    a_bar = max(0.0, float(np.mean(np.mean(V * V, axis=0) - np.mean(V, axis=0) ** 2)))
    return EgeValue(e_bar - a_bar, e_bar, a_bar)


# ---------------------------
# Incremental aggregates
# ---------------------------
@dataclass(frozen=True, eq=False)
class EnsembleAggregates:
    members: Tuple[int, ...]
    row_sum: np.ndarray
    row_sumsq: np.ndarray
    sum_member_error: float

    @classmethod
    def empty(cls, n_rows: int) -> "EnsembleAggregates":
        return cls((), np.zeros(n_rows), np.zeros(n_rows), 0.0)

    @property
    def m(self) -> int:
        return len(self.members)

    def value(self) -> EgeValue:
        return _value(self.m, self.row_sum, self.row_sumsq, self.sum_member_error)


def _added(agg: EnsembleAggregates, p: PredictionVector, y: np.ndarray):
    if p.node_id in agg.members:
        raise EnsembleError(f"Prediction vector {p.node_id} is already a member")
    _check_length(p, y)
    row_sum = agg.row_sum + p.values
    row_sumsq = agg.row_sumsq + p.values * p.values
    sum_member_error = agg.sum_member_error + squared_error(p.values, y)
    return row_sum, row_sumsq, sum_member_error


def add_member(agg: EnsembleAggregates, p: PredictionVector, y: Labels) -> Tuple[EnsembleAggregates, EgeValue]:
    row_sum, row_sumsq, sum_member_error = _added(agg, p, _labels(y))
    new = EnsembleAggregates(agg.members + (p.node_id,), row_sum, row_sumsq, sum_member_error)
    return new, new.value()


def probe_member(agg: EnsembleAggregates, p: PredictionVector, y: Labels) -> EgeValue:
    """EgeValue of agg plus p; agg itself is left untouched."""
    row_sum, row_sumsq, sum_member_error = _added(agg, p, _labels(y))
    return _value(agg.m + 1, row_sum, row_sumsq, sum_member_error)


def remove_member(agg: EnsembleAggregates, p: PredictionVector, y: Labels) -> Tuple[EnsembleAggregates, EgeValue]:
    if p.node_id not in agg.members:
        raise EnsembleError(f"Prediction vector {p.node_id} is not a member")
    y = _labels(y)
    _check_length(p, y)
    members = tuple(i for i in agg.members if i != p.node_id)
    if not members:
        empty = EnsembleAggregates.empty(len(y))
        return empty, EMPTY_VALUE
    new = EnsembleAggregates(
        members,
        agg.row_sum - p.values,
        agg.row_sumsq - p.values * p.values,
        agg.sum_member_error - squared_error(p.values, y),
    )
    return new, new.value()


# ---------------------------
# Subset selection
# ---------------------------
@dataclass(frozen=True, eq=False)
class Selection:
    members: Tuple[PredictionVector, ...]
    value: EgeValue
    history: Tuple[float, ...] = ()

    @property
    def member_ids(self) -> Tuple[int, ...]:
        return tuple(p.node_id for p in self.members)


def _sorted_candidates(candidates: Iterable[PredictionVector]) -> list[PredictionVector]:
    ordered = sorted(candidates, key=lambda p: p.node_id)
    if not ordered:
        raise EnsembleError("No candidates to select from")
    ids = [p.node_id for p in ordered]
    if len(set(ids)) != len(ids):
        raise EnsembleError("Candidate node ids are not unique")
    return ordered


def greedy_select(
    candidates: Iterable[PredictionVector],
    y: Labels,
    phi: float = 0.0,
    allow_drop: bool = False,
) -> Selection:
    """
    Forward selection: take the candidate whose addition gives the lowest E and accept it
    while E(M + c) <= E(M) + phi, with E(empty) = inf. Ties go to the lower node id.
    With allow_drop, each acceptance is followed by one pass over the earlier members,
    dropping any whose removal strictly lowers E. Dropped members are not reconsidered.
    """
    if phi < 0:
        raise EnsembleError(f"phi must be non-negative, got {phi}")
    y = _labels(y)
    remaining = _sorted_candidates(candidates)
    agg = EnsembleAggregates.empty(len(y))
    current = EMPTY_VALUE
    selected: list[PredictionVector] = []
    history: list[float] = []

    while remaining:
        best_index: Optional[int] = None
        best_value: Optional[EgeValue] = None
        for i, p in enumerate(remaining):
            v = probe_member(agg, p, y)
            if best_value is None or v.E < best_value.E:
                best_index, best_value = i, v
        if best_value.E > current.E + phi:
            break
        chosen = remaining.pop(best_index)
        agg, current = add_member(agg, chosen, y)
        selected.append(chosen)
        logger.debug(f"Accepted model {chosen.node_id}: E={current.E:.6f}")

        if allow_drop:
            for p in selected[:-1]:
                if len(selected) == 1:
                    break
                trial_agg, trial = remove_member(agg, p, y)
                if trial.E < current.E:
                    agg, current = trial_agg, trial
                    selected.remove(p)
                    logger.debug(f"Dropped model {p.node_id}: E={current.E:.6f}")
        history.append(current.E)

    return Selection(tuple(selected), current, tuple(history))


def brute_force_select(candidates: Sequence[PredictionVector], y: Labels, chunk: int = 4096) -> Selection:
    """Exact minimizer of E over every non-empty subset; ties go to the lexicographically smallest id set."""
    ordered = _sorted_candidates(candidates)
    k = len(ordered)
    if k > BRUTE_FORCE_CAP:
        raise EnsembleError(f"Brute force is capped at {BRUTE_FORCE_CAP} candidates, got {k}")
    y = _labels(y)
    for p in ordered:
        _check_length(p, y)
    V = np.stack([p.values for p in ordered])
    bits = 1 << np.arange(k)

    total = (1 << k) - 1
    errors = np.empty(total)
    for start in range(1, total + 1, chunk):
        masks = np.arange(start, min(start + chunk, total + 1))
        include = ((masks[:, None] & bits[None, :]) > 0).astype(np.float64)
        mean = include @ V / include.sum(axis=1, keepdims=True)
        errors[start - 1 : start - 1 + len(masks)] = np.mean((y[None, :] - mean) ** 2, axis=1)

    best = errors.min()
    tied = np.flatnonzero(errors <= best + TIE_TOLERANCE) + 1

    def ids(mask: int) -> Tuple[int, ...]:
        return tuple(ordered[j].node_id for j in range(k) if mask >> j & 1)

    mask = min((int(t) for t in tied), key=ids)
    members = tuple(ordered[j] for j in range(k) if mask >> j & 1)
    value = ege(members, y)
    return Selection(members, value, (value.E,))
