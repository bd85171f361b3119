import math

import numpy as np
import pytest

from conftest import categorical, make_dataset, mixed_dataset, numeric, small_config
from explorer.data_utils import Task
from explorer.errors import ExplorationError
from explorer.estimator_utils import EstimatorId
from explorer.explore_utils import (
    Action,
    ActionKind,
    Clock,
    ExplorationTree,
    Explorer,
    enumerate_actions,
    reward,
    run,
)
from explorer.policy_utils import QPolicy, default_policy
from explorer.transform_utils import TRANSFORM_CATALOG, TransformId


class FirstLegal:
    def choose(self, explorer):
        return explorer.legal_actions()[0]


def _explorer(d=None, cap=10, **exploration):
    d = d if d is not None else mixed_dataset(60, seed=2)
    exploration.setdefault("hpo_evaluations", 1)
    return Explorer(d, Clock(100.0, cap), small_config(**exploration), seed=0)


def _run(d=None, cap=6, seed=0, **exploration):
    d = d if d is not None else mixed_dataset(60, seed=2)
    exploration.setdefault("hpo_evaluations", 1)
    return run(d, Clock(100.0, cap), QPolicy(default_policy()), small_config(**exploration), seed)


class TestClock:
    def test_virtual(self):
        clock = Clock(100.0, 4)
        clock.start()
        assert clock.virtual
        clock.tick()
        clock.tick()
        assert clock.elapsed == 50.0
        assert clock.remaining_fraction == 0.5
        assert not clock.exhausted()
        clock.tick()
        clock.tick()
        assert clock.exhausted()
        assert clock.remaining == 0.0

    def test_zero_iterations(self):
        clock = Clock(10.0, 0)
        assert clock.exhausted()
        assert clock.elapsed == 0.0

    def test_wall_clock(self):
        now = [10.0]
        clock = Clock(5.0, timer=lambda: now[0])
        clock.start()
        now[0] = 12.0
        assert clock.elapsed == 2.0
        assert clock.remaining_fraction == pytest.approx(0.6)
        now[0] = 15.0
        assert clock.exhausted()


class TestReward:
    def test_unchanged(self):
        assert reward(0.2, 0.2, 0.25) == 0.0

    def test_drop(self):
        assert reward(0.25, 0.20, 0.25) == pytest.approx(0.2)
        assert reward(0.20, 0.15, 0.25) == pytest.approx(0.2)

    def test_degenerate_baseline(self):
        assert reward(0.1, 0.0, 0.0) == 0.0

    def test_first_step(self):
        assert reward(math.inf, 0.3, 0.3) == 0.0


class TestEnumerate:
    def test_fresh_tree(self):
        tree = ExplorationTree.create(mixed_dataset(60), depth_cap=4)
        actions = enumerate_actions(tree)
        assert len(actions) == 14
        assert [a.target for a in actions[:10]] == list(TRANSFORM_CATALOG)
        assert all(a.kind is ActionKind.ESTIMATOR for a in actions[10:])
        assert not any(a.kind is ActionKind.HPO for a in actions)

    def test_hpo_follows_fit(self):
        explorer = _explorer()
        explorer.start()
        actions = explorer.legal_actions()
        assert Action(ActionKind.HPO, 0, EstimatorId.RANDOM_FOREST) in actions
        assert Action(ActionKind.ESTIMATOR, 0, EstimatorId.RANDOM_FOREST) not in actions
        assert Action(ActionKind.HPO, 0, EstimatorId.KNN) not in actions

    def test_depth_cap(self):
        explorer = _explorer(depth_cap=1)
        explorer.start()
        explorer.advance(Action(ActionKind.TRANSFORM, 0, TransformId.CBRT))
        child = [a for a in explorer.legal_actions() if a.data_node == 1]
        assert child
        assert not any(a.kind is ActionKind.TRANSFORM for a in child)

    def test_depth_cap_zero(self):
        tree = ExplorationTree.create(mixed_dataset(60), depth_cap=0)
        assert len(enumerate_actions(tree)) == 4

    def test_order_is_by_node_then_kind(self):
        explorer = _explorer()
        explorer.start()
        explorer.advance(Action(ActionKind.TRANSFORM, 0, TransformId.TANH))
        keys = [(a.data_node, int(a.kind)) for a in explorer.legal_actions()]
        assert keys == sorted(keys)


class TestStep:
    def test_illegal_action(self):
        explorer = _explorer()
        explorer.start()
        with pytest.raises(ExplorationError):
            explorer.step(Action(ActionKind.ESTIMATOR, 0, EstimatorId.RANDOM_FOREST))
        with pytest.raises(ExplorationError):
            explorer.step(Action(ActionKind.ESTIMATOR, 0, EstimatorId.RIDGE_REGRESSION))

    def test_baseline_is_step_zero(self):
        explorer = _explorer()
        record = explorer.start()
        assert record.step == 0
        assert record.reward == 0.0
        assert explorer.tree.baseline_error == explorer.tree.model_nodes[0].cv_error
        assert explorer.tree.e_min == pytest.approx(explorer.tree.baseline_error)

    def test_noop_transform(self):
        rng = np.random.default_rng(0)
        k = rng.choice(["a", "b"], size=60)
        y = ((k == "a") ^ (rng.random(60) < 0.1)).astype(float)
        d = make_dataset([numeric("flat", np.full(60, 3.0)), categorical("k", k)], y)
        explorer = _explorer(d)
        explorer.start()
        record = explorer.advance(Action(ActionKind.TRANSFORM, 0, TransformId.STDSCALER))
        assert record.noop
        assert record.reward == 0.0
        assert explorer.tree.data_nodes[1].noop
        assert not [a for a in explorer.legal_actions() if a.data_node == 1]

    def test_zero_budget(self):
        explorer = Explorer(mixed_dataset(60), Clock(0.0, 5), small_config(), seed=0)
        with pytest.raises(ExplorationError):
            explorer.start()

    def test_baseline_overrunning_wall_clock(self):
        ticks = iter(range(0, 10_000, 10))
        clock = Clock(5.0, timer=lambda: float(next(ticks)))
        explorer = Explorer(mixed_dataset(60), clock, small_config(), seed=0)
        with pytest.raises(ExplorationError):
            explorer.start()

    def test_baseline_inside_wall_clock(self):
        clock = Clock(5.0, timer=lambda: 0.0)
        explorer = Explorer(mixed_dataset(60), clock, small_config(), seed=0)
        assert explorer.start().step == 0

    def test_hpo_node_is_sibling(self):
        explorer = _explorer()
        explorer.start()
        record = explorer.advance(Action(ActionKind.HPO, 0, EstimatorId.RANDOM_FOREST))
        assert not record.noop
        models = explorer.tree.models_on(0)
        assert [m.hpo for m in models] == [False, True]
        assert EstimatorId.RANDOM_FOREST in explorer.incumbents


class TestRun:
    def test_no_iterations_keeps_baseline(self):
        result = _run(cap=0)
        assert len(result.steps) == 1
        assert result.selection.member_ids == (0,)
        assert result.e_min == pytest.approx(result.baseline_error)

    def test_rewards_telescope(self):
        result = _run(cap=6)
        rewards = [s.reward for s in result.steps]
        assert all(r >= 0.0 for r in rewards)
        expected = (result.baseline_error - result.e_min) / result.baseline_error
        assert sum(rewards) == pytest.approx(expected, abs=1e-9)

    def test_e_min_never_rises(self):
        result = _run(cap=6)
        e = [s.e_min for s in result.steps]
        assert all(b <= a for a, b in zip(e, e[1:]))

    def test_step_count(self):
        result = _run(cap=5)
        assert len(result.steps) == 6
        assert [s.step for s in result.steps] == list(range(6))

    def test_deterministic(self):
        a = _run(cap=5, seed=3)
        b = _run(cap=5, seed=3)
        assert [(s.action, s.e_min, s.reward) for s in a.steps] == [(s.action, s.e_min, s.reward) for s in b.steps]
        assert a.selection.member_ids == b.selection.member_ids

    def test_no_action_applied_twice(self):
        d = mixed_dataset(60, seed=2)
        result = run(d, Clock(100.0, 12), FirstLegal(), small_config(hpo_evaluations=1), seed=0)
        actions = [a for a, _ in result.tree.action_log]
        assert len(actions) == len(set(actions))

    def test_ensemble_predicts_new_rows(self):
        d = mixed_dataset(80, seed=4)
        train, test = d.take(np.arange(60)), d.take(np.arange(60, 80))
        result = run(train, Clock(100.0, 12), QPolicy(default_policy()), small_config(hpo_evaluations=1), seed=0)
        pred = result.ensemble.predict(test)
        assert pred.shape == (20,)
        assert np.all((pred >= 0.0) & (pred <= 1.0))
        assert [m.node_id for m in result.ensemble.members] == list(result.selection.member_ids)

    def test_regression_run(self):
        d = mixed_dataset(60, seed=5, task=Task.REGRESSION)
        result = _run(d, cap=3)
        assert result.tree.error_scale == pytest.approx(np.var(d.target.values))
        assert result.e_min <= result.baseline_error
