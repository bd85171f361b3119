"""
policy_utils.py

Summary:
- Q(s, a) = w . f(s, a) with 17 action-conditioned state features.
- Greedy / epsilon-greedy action choice, one-step TD update, episode training against any
  Environment (the exploration tree or a stub MDP).
- Policy files: a header line, a hyper-parameter line, then one name<TAB>weight line per feature.
"""

import logging
import math
import re
from dataclasses import dataclass, replace
from typing import Any, Optional, Protocol, Sequence, Tuple

import numpy as np

from .config_utils import ExplorerConfig, PolicyConfig
from .data_utils import Dataset, derive_rng, derive_seed
from .errors import PolicyDiverged, PolicyError, PolicyFileError, PolicySchemaError
from .explore_utils import (
    DEGENERATE_BASELINE,
    Action,
    ActionKind,
    Clock,
    ExplorationTree,
    Explorer,
    enumerate_actions,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FEATURE_NAMES: Tuple[str, ...] = (
    "bias",
    "node_mean_score",
    "node_best_score",
    "estimator_mean_score",
    "transform_mean_gain",
    "transform_best_gain",
    "remaining_fraction",
    "total_budget",
    "numeric_count",
    "categorical_count",
    "has_datetime",
    "remaining_x_node_mean",
    "remaining_x_node_best",
    "depth",
    "kind_transform",
    "kind_estimator",
    "kind_hpo",
)
FEATURE_DIM = len(FEATURE_NAMES)
SCHEMA_DIMS = {SCHEMA_VERSION: FEATURE_DIM}

FILE_MAGIC = "aprl-policy"
BUDGET_SCALE = math.log1p(7200.0)
COUNT_SCALE = math.log1p(1000.0)


@dataclass(frozen=True, eq=False)
class PolicyWeights:
    w: np.ndarray
    gamma: float = 0.99
    alpha: float = 0.05
    epsilon: float = 0.2
    training_episodes: int = 0
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=np.float64))
        dim = SCHEMA_DIMS.get(self.schema_version)
        if dim is None:
            raise PolicySchemaError(f"Unknown policy schema version {self.schema_version}")
        if self.w.shape != (dim,):
            raise PolicyError(f"Schema v{self.schema_version} needs {dim} weights, got {self.w.shape}")
        if not 0.0 <= self.gamma < 1.0:
            raise PolicyError(f"gamma must be in [0, 1), got {self.gamma}")
        if self.alpha < 0.0:
            raise PolicyError(f"alpha must be >= 0, got {self.alpha}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise PolicyError(f"epsilon must be in [0, 1], got {self.epsilon}")

    @classmethod
    def zeros(cls, config: Optional[PolicyConfig] = None) -> "PolicyWeights":
        config = config or PolicyConfig()
        return cls(np.zeros(FEATURE_DIM), config.gamma, config.alpha, config.epsilon)


def default_policy() -> PolicyWeights:
    """Hand-set weights for runs without a trained policy file."""
    w = np.zeros(FEATURE_DIM)
    w[FEATURE_NAMES.index("node_best_score")] = 0.5
    w[FEATURE_NAMES.index("estimator_mean_score")] = 0.3
    w[FEATURE_NAMES.index("transform_mean_gain")] = 1.0
    w[FEATURE_NAMES.index("transform_best_gain")] = 1.0
    w[FEATURE_NAMES.index("remaining_x_node_best")] = 0.25
    w[FEATURE_NAMES.index("depth")] = -0.2
    w[FEATURE_NAMES.index("kind_transform")] = 0.3
    w[FEATURE_NAMES.index("kind_estimator")] = 1.0
    w[FEATURE_NAMES.index("kind_hpo")] = -0.3
    return PolicyWeights(w, epsilon=0.0)


# ---------------------------
# Features
# ---------------------------
def _score(tree: ExplorationTree, cv_error: float) -> float:
    return 1.0 - cv_error / tree.error_scale


def transform_gains(tree: ExplorationTree, transform) -> list[float]:
    """Normalized drop in best model error from parent to child, per past application of `transform`."""
    baseline = tree.baseline_error
    if baseline is None or baseline <= DEGENERATE_BASELINE:
        return []
    gains = []
    for node in tree.data_nodes:
        if node.spec is None or node.noop or node.spec.id is not transform:
            continue
        parent_models = tree.models_on(node.parent)
        child_models = tree.models_on(node.node_id)
        if parent_models and child_models:
            parent_best = min(m.cv_error for m in parent_models)
            child_best = min(m.cv_error for m in child_models)
            gains.append((parent_best - child_best) / baseline)
    return gains


def featurize(tree: ExplorationTree, clock: Clock, action: Action) -> np.ndarray:
    f = np.zeros(FEATURE_DIM)
    node = tree.data_nodes[action.data_node]
    d = node.dataset
    rho = clock.remaining_fraction

    f[0] = 1.0
    node_scores = [_score(tree, m.cv_error) for m in tree.models_on(node.node_id)]
    if node_scores:
        f[1] = float(np.mean(node_scores))
        f[2] = max(node_scores)
    if action.kind is ActionKind.TRANSFORM:
        gains = transform_gains(tree, action.target)
        if gains:
            f[4] = float(np.mean(gains))
            f[5] = max(gains)
    else:
        type_scores = [_score(tree, m.cv_error) for m in tree.models_of(action.target)]
        if type_scores:
            f[3] = float(np.mean(type_scores))
    f[6] = rho
    f[7] = math.log1p(max(0.0, clock.t_max)) / BUDGET_SCALE
    f[8] = min(1.0, math.log1p(len(d.numeric_columns())) / COUNT_SCALE)
    f[9] = min(1.0, math.log1p(len(d.categorical_columns())) / COUNT_SCALE)
    f[10] = 1.0 if d.has_datetime else 0.0
    f[11] = rho * f[1]
    f[12] = rho * f[2]
    f[13] = min(1.0, node.depth / tree.depth_cap) if tree.depth_cap > 0 else 0.0
    f[14 + int(action.kind)] = 1.0
    return f


# ---------------------------
# Action choice and learning
# ---------------------------
def q_value(w: PolicyWeights, f: np.ndarray) -> float:
    f = np.asarray(f, dtype=np.float64)
    if f.shape != w.w.shape:
        raise PolicyError(f"Feature vector has shape {f.shape}, weights have {w.w.shape}")
    return float(w.w @ f)


def select_index(
    w: PolicyWeights,
    features: Sequence[np.ndarray],
    epsilon: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> int:
    """argmax of Q with ties to the earliest entry; uniform-random with probability epsilon."""
    if not features:
        raise PolicyError("No legal actions to choose from")
    if epsilon > 0.0:
        if rng is None:
            raise PolicyError("epsilon-greedy choice needs a random generator")
        if rng.random() < epsilon:
            return int(rng.integers(len(features)))
    q = [q_value(w, f) for f in features]
    return int(np.argmax(q))


def select_action(
    w: PolicyWeights,
    tree: ExplorationTree,
    clock: Clock,
    epsilon: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> Action:
    actions = enumerate_actions(tree)
    if not actions:
        raise PolicyError("No legal actions to choose from")
    index = select_index(w, [featurize(tree, clock, a) for a in actions], epsilon, rng)
    return actions[index]


def td_update(w: PolicyWeights, f: np.ndarray, r: float, next_best_q: float, terminal: bool) -> PolicyWeights:
    """w <- w + alpha * (r + gamma * max_a' Q(s', a') - Q(s, a)) * f(s, a); the max term is 0 when terminal."""
    f = np.asarray(f, dtype=np.float64)
    target = r + (0.0 if terminal else w.gamma * next_best_q)
    delta = target - q_value(w, f)
    new = w.w + w.alpha * delta * f
    if not np.all(np.isfinite(new)):
        raise PolicyDiverged(f"Non-finite weights after TD update (delta={delta})")
    return replace(w, w=new)


class QPolicy:
    """Chooses exploration actions by Q value; epsilon > 0 only while training."""

    def __init__(self, weights: PolicyWeights, epsilon: float = 0.0, rng: Optional[np.random.Generator] = None):
        self.weights = weights
        self.epsilon = epsilon
        self.rng = rng

    def choose(self, explorer: Explorer) -> Action:
        return select_action(self.weights, explorer.tree, explorer.clock, self.epsilon, self.rng)


class Environment(Protocol):
    def reset(self) -> None: ...

    def legal_actions(self) -> Sequence[Any]: ...

    def features(self, action: Any) -> np.ndarray: ...

    def step(self, action: Any) -> float: ...

    def done(self) -> bool: ...


class ExplorationEnvironment:
    """Environment view of one exploration run."""

    def __init__(self, explorer: Explorer):
        self.explorer = explorer

    def reset(self):
        self.explorer.start()

    def legal_actions(self) -> list[Action]:
        return self.explorer.legal_actions()

    def features(self, action: Action) -> np.ndarray:
        return featurize(self.explorer.tree, self.explorer.clock, action)

    def step(self, action: Action) -> float:
        return self.explorer.advance(action).reward

    def done(self) -> bool:
        return self.explorer.done()


def run_episode(env: Environment, w: PolicyWeights, rng: np.random.Generator) -> PolicyWeights:
    """One epsilon-greedy episode with a TD update after every step."""
    env.reset()
    actions = [] if env.done() else list(env.legal_actions())
    features = [env.features(a) for a in actions]
    while actions:
        index = select_index(w, features, w.epsilon, rng)
        r = env.step(actions[index])
        f = features[index]

        actions = [] if env.done() else list(env.legal_actions())
        features = [env.features(a) for a in actions]
        terminal = not actions
        next_best_q = 0.0 if terminal else max(q_value(w, g) for g in features)
        w = td_update(w, f, r, next_best_q, terminal)
    return w


def train_on_environment(
    make_env, episodes: int, seed: int, config: Optional[PolicyConfig] = None
) -> PolicyWeights:
    """Train from zero weights; make_env(episode) returns the environment for that episode."""
    w = PolicyWeights.zeros(config)
    rng = derive_rng(seed, "policy")
    for episode in range(episodes):
        w = run_episode(make_env(episode), w, rng)
    return replace(w, training_episodes=episodes)


def train(
    corpus: Sequence[Tuple[Dataset, float]],
    episodes: int,
    seed: int,
    config: Optional[ExplorerConfig] = None,
    iteration_cap: Optional[int] = None,
) -> PolicyWeights:
    """Round-robin over the (dataset, t_max) corpus, one full exploration run per episode."""
    if not corpus:
        raise PolicyError("Training corpus is empty")
    config = config or ExplorerConfig()

    def make_env(episode: int) -> ExplorationEnvironment:
        d, t_max = corpus[episode % len(corpus)]
        logger.info(f"Episode {episode + 1}/{episodes}: {d.name} (t_max={t_max})")
        clock = Clock(t_max, iteration_cap)
        return ExplorationEnvironment(Explorer(d, clock, config, derive_seed(seed, "episode", episode)))

    return train_on_environment(make_env, episodes, seed, config.policy)


# ---------------------------
# Persistence
# ---------------------------
def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_policy(w: PolicyWeights, path: str):
    lines = [
        f"{FILE_MAGIC} v{w.schema_version}",
        f"gamma={_fmt(w.gamma)} alpha={_fmt(w.alpha)} epsilon={_fmt(w.epsilon)} episodes={w.training_episodes}",
    ]
    lines += [f"{name}\t{_fmt(value)}" for name, value in zip(FEATURE_NAMES, w.w)]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    logger.info(f"Policy written to {path}")


_HEADER = re.compile(rf"^{re.escape(FILE_MAGIC)} v(\d+)$")


def load_policy(path: str) -> PolicyWeights:
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise PolicyFileError(f"Cannot read policy file {path}: {e}") from e

    if not lines:
        raise PolicyFileError(f"{path}: empty policy file")
    header = _HEADER.match(lines[0].strip())
    if header is None:
        raise PolicyFileError(f"{path}: bad header {lines[0]!r}")
    version = int(header.group(1))
    if version not in SCHEMA_DIMS:
        raise PolicySchemaError(f"{path}: schema version {version}, expected {SCHEMA_VERSION}")
    if len(lines) < 2:
        raise PolicyFileError(f"{path}: missing hyper-parameter line")

    try:
        meta = dict(token.split("=", 1) for token in lines[1].split())
        gamma, alpha, epsilon = float(meta["gamma"]), float(meta["alpha"]), float(meta["epsilon"])
        episodes = int(meta["episodes"])
    except (KeyError, ValueError) as e:
        raise PolicyFileError(f"{path}: bad hyper-parameter line {lines[1]!r}") from e

    body = [line for line in lines[2:] if line.strip()]
    if len(body) != SCHEMA_DIMS[version]:
        raise PolicyFileError(f"{path}: {len(body)} weight lines, expected {SCHEMA_DIMS[version]}")
    weights = []
    for expected, line in zip(FEATURE_NAMES, body):
        parts = line.split("\t")
        if len(parts) != 2 or parts[0] != expected:
            raise PolicyFileError(f"{path}: expected weight for '{expected}', got {line!r}")
        try:
            weights.append(float(parts[1]))
        except ValueError as e:
            raise PolicyFileError(f"{path}: bad weight {parts[1]!r}") from e

    try:
        return PolicyWeights(np.array(weights), gamma, alpha, epsilon, episodes, version)
    except PolicyError as e:
        raise PolicyFileError(f"{path}: {e}") from e
