"""
explore_utils.py

Summary:
- Exploration tree: data nodes (derived feature sets) and model nodes (out-of-fold predictions).
- Actions: apply a transform, fit an estimator with default hyper-parameters, or run HPO.
- Every new model node re-runs greedy ensemble selection; E_min is tracked best-so-far and the
  reward of a step is the drop in E_min relative to the baseline error.
- run() drives the loop with any object implementing ActionPolicy, then refits the selected
  members on all training rows.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Optional, Protocol, Tuple, Union

import numpy as np

from .config_utils import ExplorerConfig
from .data_utils import Dataset, FoldPlan, Task, derive_seed, make_folds
from .ensemble_utils import Selection, greedy_select
from .errors import EstimatorError, ExplorationError, HpoTimeout, TransformError
from .estimator_utils import (
    DatasetModel,
    EstimatorId,
    HyperParams,
    PredictionVector,
    baseline_estimator,
    cv_predict,
    estimators_for,
    fit_dataset,
)
from .hpo_utils import Incumbent, TimeBox, optimize
from .transform_utils import TRANSFORM_CATALOG, TransformId, TransformSpec, applicable, fit_apply, replay_chain

logger = logging.getLogger(__name__)

DEGENERATE_BASELINE = 1e-12


class ActionKind(IntEnum):
    TRANSFORM = 0
    ESTIMATOR = 1
    HPO = 2


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    data_node: int
    target: Union[TransformId, EstimatorId]

    def describe(self) -> str:
        return f"{self.kind.name.lower()}({self.data_node},{self.target.value})"


# ---------------------------
# Clock
# ---------------------------
class Clock:
    """
    Exploration budget of t_max seconds. With an iteration cap the clock is virtual:
    each step advances it by t_max / cap, so runs do not depend on wall time.
    """

    def __init__(self, t_max: float, iteration_cap: Optional[int] = None, timer: Callable[[], float] = time.perf_counter):
        self.t_max = float(t_max)
        self.iteration_cap = iteration_cap
        self.steps = 0
        self._timer = timer
        self._start = timer()

    @property
    def virtual(self) -> bool:
        return self.iteration_cap is not None

    def start(self):
        self.steps = 0
        self._start = self._timer()

    def tick(self):
        self.steps += 1

    @property
    def elapsed(self) -> float:
        if self.virtual:
            if self.iteration_cap <= 0:
                return 0.0
            return self.t_max * min(self.steps, self.iteration_cap) / self.iteration_cap
        return self._timer() - self._start

    @property
    def remaining(self) -> float:
        return max(0.0, self.t_max - self.elapsed)

    @property
    def remaining_fraction(self) -> float:
        if self.t_max <= 0:
            return 0.0
        return min(1.0, self.remaining / self.t_max)

    def exhausted(self) -> bool:
        if self.virtual:
            return self.steps >= self.iteration_cap
        return self.elapsed >= self.t_max


# ---------------------------
# Tree
# ---------------------------
@dataclass(eq=False)
class DataNode:
    node_id: int
    dataset: Dataset
    parent: Optional[int] = None
    spec: Optional[TransformSpec] = None
    depth: int = 0
    transforms: Tuple[TransformId, ...] = ()

    @property
    def noop(self) -> bool:
        return self.spec is not None and self.spec.noop


@dataclass(eq=False)
class ModelNode:
    node_id: int
    data_node: int
    estimator: EstimatorId
    hyperparams: HyperParams
    prediction: PredictionVector
    hpo: bool = False

    @property
    def cv_error(self) -> float:
        return self.prediction.cv_error


@dataclass(frozen=True)
class StepRecord:
    step: int
    action: str
    elapsed: float
    e_min: float
    reward: float
    noop: bool = False

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "action": self.action,
            "elapsed": float(self.elapsed),
            "e_min": float(self.e_min),
            "reward": float(self.reward),
            "noop": self.noop,
        }


@dataclass(eq=False)
class ExplorationTree:
    data_nodes: list[DataNode]
    depth_cap: int
    error_scale: float = 1.0
    model_nodes: list[ModelNode] = field(default_factory=list)
    action_log: list[Tuple[Action, StepRecord]] = field(default_factory=list)
    applied: set[Action] = field(default_factory=set)
    best: Optional[Selection] = None
    baseline_error: Optional[float] = None

    @classmethod
    def create(cls, d: Dataset, depth_cap: int) -> "ExplorationTree":
        if d.task is Task.REGRESSION:
            variance = float(np.var(d.target.values))
            scale = variance if variance > DEGENERATE_BASELINE else 1.0
        else:
            scale = 1.0
        return cls([_data_node(0, d)], depth_cap, scale)

    @property
    def root(self) -> DataNode:
        return self.data_nodes[0]

    @property
    def task(self) -> Task:
        return self.root.dataset.task

    @property
    def e_min(self) -> float:
        return self.best.value.E if self.best is not None else math.inf

    def models_on(self, data_node: int) -> list[ModelNode]:
        return [m for m in self.model_nodes if m.data_node == data_node]

    def models_of(self, estimator: EstimatorId) -> list[ModelNode]:
        return [m for m in self.model_nodes if m.estimator is estimator]

    def has_default_model(self, data_node: int, estimator: EstimatorId) -> bool:
        return any(m.estimator is estimator and not m.hpo for m in self.models_on(data_node))

    def lineage(self, data_node: int) -> list[TransformSpec]:
        chain = []
        node = self.data_nodes[data_node]
        while node.parent is not None:
            chain.append(node.spec)
            node = self.data_nodes[node.parent]
        return chain[::-1]

    def predictions(self) -> list[PredictionVector]:
        return [m.prediction for m in self.model_nodes]


def _data_node(node_id: int, d: Dataset, parent: Optional[int] = None, spec=None, depth: int = 0) -> DataNode:
    usable = () if spec is not None and spec.noop else tuple(t for t in TRANSFORM_CATALOG if applicable(d, t))
    return DataNode(node_id, d, parent, spec, depth, usable)


def reward(prev_e_min: float, new_e_min: float, baseline: float) -> float:
    """Drop in E_min normalized by the baseline error; 0 for a degenerate baseline."""
    if baseline <= DEGENERATE_BASELINE or not math.isfinite(prev_e_min):
        return 0.0
    return (prev_e_min - new_e_min) / baseline


def enumerate_actions(tree: ExplorationTree) -> list[Action]:
    """
    Legal actions in deterministic order: by data node, then transform < estimator < hpo,
    then catalog order. No action is offered twice and no-op nodes offer nothing.
    """
    actions = []
    estimators = estimators_for(tree.task)
    for node in tree.data_nodes:
        if node.noop:
            continue
        if node.depth < tree.depth_cap:
            for t in node.transforms:
                a = Action(ActionKind.TRANSFORM, node.node_id, t)
                if a not in tree.applied:
                    actions.append(a)
        for e in estimators:
            a = Action(ActionKind.ESTIMATOR, node.node_id, e)
            if a not in tree.applied:
                actions.append(a)
        for e in estimators:
            a = Action(ActionKind.HPO, node.node_id, e)
            if a not in tree.applied and tree.has_default_model(node.node_id, e):
                actions.append(a)
    return actions


# ---------------------------
# Fitted ensemble
# ---------------------------
@dataclass(frozen=True, eq=False)
class FittedMember:
    node_id: int
    chain: Tuple[TransformSpec, ...]
    model: DatasetModel
    cv_error: float

    @property
    def estimator(self) -> EstimatorId:
        return self.model.fitted.estimator

    @property
    def hyperparams(self) -> HyperParams:
        return self.model.fitted.hyperparams

    def predict(self, d: Dataset) -> np.ndarray:
        return self.model.predict(replay_chain(list(self.chain), d))


@dataclass(frozen=True, eq=False)
class FittedEnsemble:
    members: Tuple[FittedMember, ...]

    def predict(self, d: Dataset) -> np.ndarray:
        """Equal-weight mean of member predictions, each on its own replayed feature set."""
        return np.mean(np.stack([m.predict(d) for m in self.members]), axis=0)


@dataclass(frozen=True, eq=False)
class RunResult:
    tree: ExplorationTree
    selection: Selection
    ensemble: FittedEnsemble
    steps: Tuple[StepRecord, ...]

    @property
    def baseline_error(self) -> float:
        return self.tree.baseline_error

    @property
    def e_min(self) -> float:
        return self.selection.value.E


# ---------------------------
# Explorer
# ---------------------------
class ActionPolicy(Protocol):
    def choose(self, explorer: "Explorer") -> Action: ...


class Explorer:
    """One exploration run over a training dataset."""

    def __init__(self, d: Dataset, clock: Clock, config: Optional[ExplorerConfig] = None, seed: int = 0):
        self.config = config or ExplorerConfig()
        self.clock = clock
        self.seed = seed
        self.tree = ExplorationTree.create(d, self.config.exploration.depth_cap)
        self.folds: FoldPlan = make_folds(d, self.config.folds, seed)
        self.incumbents: dict[EstimatorId, Incumbent] = {}
        self.steps: list[StepRecord] = []

    @property
    def y(self) -> np.ndarray:
        return self.tree.root.dataset.target.values

    def legal_actions(self) -> list[Action]:
        return enumerate_actions(self.tree)

    def done(self) -> bool:
        return self.clock.exhausted() or not self.legal_actions()

    # --- applying actions ---
    def _apply_transform(self, action: Action) -> bool:
        parent = self.tree.data_nodes[action.data_node]
        d = parent.dataset
        try:
            out, spec = fit_apply(d, action.target, np.ones(d.n_rows, dtype=bool), self.config.transforms)
        except TransformError as e:
            logger.warning(f"{action.describe()} failed: {e}")
            spec = TransformSpec(action.target, noop=True)
            out = d
        node = _data_node(len(self.tree.data_nodes), out, parent.node_id, spec, parent.depth + 1)
        self.tree.data_nodes.append(node)
        return spec.noop

    def _add_model(self, data_node: int, prediction: PredictionVector, hpo: bool):
        node_id = len(self.tree.model_nodes)
        prediction = prediction.with_node_id(node_id)
        model = ModelNode(node_id, data_node, prediction.estimator, dict(prediction.hyperparams), prediction, hpo)
        self.tree.model_nodes.append(model)

        selection = greedy_select(
            self.tree.predictions(),
            self.y,
            phi=self.config.exploration.phi,
            allow_drop=self.config.exploration.allow_drop,
        )
        if self.tree.best is None or selection.value.E < self.tree.best.value.E:
            self.tree.best = selection
        if self.tree.baseline_error is None:
            self.tree.baseline_error = prediction.cv_error

    def _fit_estimator(self, action: Action) -> bool:
        d = self.tree.data_nodes[action.data_node].dataset
        seed = derive_seed(self.seed, "cv", action.data_node, action.target.value)
        try:
            pv = cv_predict(action.target, None, d, self.folds, seed, workers=self.config.workers)
        except EstimatorError as e:
            logger.warning(f"{action.describe()} failed: {e}")
            return True
        self._add_model(action.data_node, pv, hpo=False)
        return False

    def _run_hpo(self, action: Action) -> bool:
        exploration = self.config.exploration
        d = self.tree.data_nodes[action.data_node].dataset
        seconds = max(exploration.hpo_floor_seconds, exploration.hpo_fraction * self.clock.remaining)
        box = TimeBox(seconds, exploration.hpo_evaluations if self.clock.virtual else None)
        seed = derive_seed(self.seed, "hpo", action.data_node, action.target.value)
        try:
            pv, incumbent = optimize(
                d, self.folds, action.target, box, self.incumbents.get(action.target), seed, self.config.workers
            )
        except HpoTimeout as e:
            logger.warning(f"{action.describe()}: {e}")
            return True
        self.incumbents[action.target] = incumbent
        self._add_model(action.data_node, pv, hpo=True)
        return False

    def step(self, action: Action) -> StepRecord:
        if action not in self.legal_actions():
            raise ExplorationError(f"Illegal action {action.describe()}")
        prev = self.tree.e_min
        if action.kind is ActionKind.TRANSFORM:
            noop = self._apply_transform(action)
        elif action.kind is ActionKind.ESTIMATOR:
            noop = self._fit_estimator(action)
        else:
            noop = self._run_hpo(action)
        self.tree.applied.add(action)

        baseline = self.tree.baseline_error
        r = reward(prev, self.tree.e_min, baseline) if baseline is not None else 0.0
        record = StepRecord(len(self.steps), action.describe(), self.clock.elapsed, self.tree.e_min, r, noop)
        self.steps.append(record)
        self.tree.action_log.append((action, record))
        logger.info(
            f"step={record.step} action={record.action} elapsed={record.elapsed:.3f} "
            f"e_min={record.e_min:.6f} reward={record.reward:.6f}" + (" noop" if noop else "")
        )
        return record

    def start(self) -> StepRecord:
        """Fit the baseline model on the root; its CV error normalizes every reward."""
        if self.clock.t_max <= 0:
            raise ExplorationError("Time budget too small to fit the baseline model")
        self.clock.start()
        action = Action(ActionKind.ESTIMATOR, 0, baseline_estimator(self.tree.task))
        record = self.step(action)
        if record.noop:
            raise ExplorationError(f"Baseline model {action.target.value} could not be fitted")
        if not self.clock.virtual and self.clock.exhausted():
            raise ExplorationError(
                f"Time budget too small: the baseline fit took {self.clock.elapsed:.1f}s of {self.clock.t_max:.1f}s"
            )
        logger.info(f"Baseline {action.target.value}: cv_error={self.tree.baseline_error:.6f}")
        return record

    def advance(self, action: Action) -> StepRecord:
        """A policy step: apply the action and charge one iteration to the clock."""
        record = self.step(action)
        self.clock.tick()
        return record

    def finalize(self) -> RunResult:
        selection = self.tree.best
        members = []
        for pv in selection.members:
            model = self.tree.model_nodes[pv.node_id]
            d = self.tree.data_nodes[model.data_node].dataset
            fitted = fit_dataset(model.estimator, model.hyperparams, d, derive_seed(self.seed, "refit", model.node_id))
            members.append(FittedMember(model.node_id, tuple(self.tree.lineage(model.data_node)), fitted, model.cv_error))
        logger.info(
            f"Selected {len(members)} model(s) {list(selection.member_ids)}: E={selection.value.E:.6f} "
            f"(baseline {self.tree.baseline_error:.6f})"
        )
        return RunResult(self.tree, selection, FittedEnsemble(tuple(members)), tuple(self.steps))


def run(
    d: Dataset,
    clock: Clock,
    policy: ActionPolicy,
    config: Optional[ExplorerConfig] = None,
    seed: int = 0,
) -> RunResult:
    explorer = Explorer(d, clock, config, seed)
    explorer.start()
    while not explorer.done():
        explorer.advance(policy.choose(explorer))
    return explorer.finalize()
