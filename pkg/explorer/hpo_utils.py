"""
hpo_utils.py

Summary:
- Time-boxed, warm-startable hyper-parameter search for one (dataset, estimator) pair.
- Evaluation order: default point, incumbent point, then alternating uniform samples and
  Gaussian perturbations of the best point so far.
- The proposal rule sits behind the Proposer interface so a surrogate model can replace it.
"""

import logging
import math
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .data_utils import Dataset, FoldPlan, derive_rng
from .errors import EstimatorError, HpoTimeout
from .estimator_utils import (
    PARAM_SPACES,
    EstimatorId,
    HyperParams,
    ParamSpec,
    PredictionVector,
    cv_predict,
    default_hyperparams,
    validate_hyperparams,
)

logger = logging.getLogger(__name__)

PERTURB_SCALE = 0.1
CHOICE_FLIP_PROBABILITY = 0.25


@dataclass(frozen=True, eq=False)
class Incumbent:
    estimator: EstimatorId
    best_hp: HyperParams
    best_cv_error: float


class TimeBox:
    """
    Anytime budget. With max_evaluations set the box counts evaluations instead of
    reading the wall clock, which keeps iteration-driven runs deterministic.
    """

    def __init__(
        self,
        seconds: float,
        max_evaluations: Optional[int] = None,
        timer: Callable[[], float] = time.perf_counter,
    ):
        self.seconds = seconds
        self.max_evaluations = max_evaluations
        self._timer = timer
        self._start = timer()
        self.evaluations = 0

    @property
    def elapsed(self) -> float:
        return self._timer() - self._start

    def expired(self) -> bool:
        if self.max_evaluations is not None:
            return self.evaluations >= self.max_evaluations
        return self.elapsed >= self.seconds

    def record_evaluation(self):
        self.evaluations += 1


# ---------------------------
# Proposals
# ---------------------------
def _log_bounds(spec: ParamSpec) -> Tuple[float, float]:
    return math.log(spec.low), math.log(spec.high)


def sample_uniform(space: Tuple[ParamSpec, ...], rng: np.random.Generator) -> HyperParams:
    hp: HyperParams = {}
    for spec in space:
        if spec.kind == "choice":
            hp[spec.name] = spec.choices[int(rng.integers(len(spec.choices)))]
        elif spec.kind == "int":
            hp[spec.name] = int(rng.integers(int(spec.low), int(spec.high) + 1))
        elif spec.log:
            lo, hi = _log_bounds(spec)
            hp[spec.name] = float(np.clip(math.exp(rng.uniform(lo, hi)), spec.low, spec.high))
        else:
            hp[spec.name] = float(rng.uniform(spec.low, spec.high))
    return hp


def perturb(space: Tuple[ParamSpec, ...], hp: HyperParams, rng: np.random.Generator) -> HyperParams:
    """Gaussian step of 10% of each numeric range (in log space for log-scaled params)."""
    out: HyperParams = {}
    for spec in space:
        value = hp[spec.name]
        if spec.kind == "choice":
            if rng.random() < CHOICE_FLIP_PROBABILITY:
                value = spec.choices[int(rng.integers(len(spec.choices)))]
            out[spec.name] = value
        elif spec.log:
            lo, hi = _log_bounds(spec)
            step = rng.normal(0.0, PERTURB_SCALE * (hi - lo))
            out[spec.name] = float(np.clip(math.exp(math.log(value) + step), spec.low, spec.high))
        else:
            step = rng.normal(0.0, PERTURB_SCALE * (spec.high - spec.low))
            moved = float(np.clip(value + step, spec.low, spec.high))
            out[spec.name] = int(round(moved)) if spec.kind == "int" else moved
    return out


class Proposer(ABC):
    @abstractmethod
    def propose(self, index: int, best_hp: HyperParams, rng: np.random.Generator) -> HyperParams:
        """Return the next configuration to evaluate after the warm-start points."""


class RandomLocalSearch(Proposer):
    """Alternate uniform-random points and local perturbations of the current best."""

    def __init__(self, space: Tuple[ParamSpec, ...]):
        self.space = space

    def propose(self, index: int, best_hp: HyperParams, rng: np.random.Generator) -> HyperParams:
        if index % 2 == 0:
            return sample_uniform(self.space, rng)
        return perturb(self.space, best_hp, rng)


def _key(hp: HyperParams) -> tuple:
    return tuple(sorted(hp.items()))


# ---------------------------
# Search
# ---------------------------
def optimize(
    d: Dataset,
    folds: FoldPlan,
    id: EstimatorId,
    time_box: TimeBox,
    incumbent: Optional[Incumbent],
    seed: int,
    workers: int = 1,
    proposer: Optional[Proposer] = None,
) -> Tuple[PredictionVector, Incumbent]:
    """
    Search hyper-parameters of `id` on `d` until the time box expires.
    Returns the prediction vector of the lowest-error configuration evaluated here and
    the incumbent for this estimator (replaced only when this call found a lower error).
    """
    if time_box.seconds <= 0:
        raise HpoTimeout(f"Non-positive time box for {id.value}")
    space = PARAM_SPACES[id]
    proposer = proposer or RandomLocalSearch(space)
    rng = derive_rng(seed, "hpo", id.value)

    best: Optional[PredictionVector] = None
    seen: set[tuple] = set()

    def evaluate(hp: HyperParams):
        nonlocal best
        seen.add(_key(hp))
        time_box.record_evaluation()
        try:
            pv = cv_predict(id, hp, d, folds, seed, workers=workers)
        except EstimatorError as e:
            logger.debug(f"{id.value} {hp} failed: {e}")
            return
        logger.debug(f"{id.value} {hp} cv_error={pv.cv_error:.6f}")
        if best is None or pv.cv_error < best.cv_error:
            best = pv

    warm = [default_hyperparams(id)]
    if incumbent is not None:
        incumbent_hp = validate_hyperparams(id, incumbent.best_hp)
        if _key(incumbent_hp) != _key(warm[0]):
            warm.append(incumbent_hp)
    for hp in warm:
        if time_box.expired():
            break
        evaluate(hp)

    index = 0
    while not time_box.expired():
        anchor = best.hyperparams if best is not None else warm[0]
        hp = proposer.propose(index, anchor, rng)
        for _ in range(20):
            if _key(hp) not in seen:
                break
            index += 1
            hp = proposer.propose(index, anchor, rng)
        index += 1
        evaluate(hp)

    if best is None:
        raise HpoTimeout(f"No {id.value} evaluation completed within the time box")

    logger.info(
        f"HPO {id.value}: {time_box.evaluations} evaluations, best cv_error={best.cv_error:.6f} {best.hyperparams}"
    )
    if incumbent is None or best.cv_error < incumbent.best_cv_error:
        incumbent = Incumbent(id, dict(best.hyperparams or {}), best.cv_error)
    return best, incumbent
