import numpy as np
import pytest

from conftest import make_dataset, mixed_dataset, numeric
from explorer.data_utils import make_folds
from explorer.errors import HpoTimeout
from explorer.estimator_utils import PARAM_SPACES, EstimatorId, cv_predict, default_hyperparams
from explorer.hpo_utils import (
    Incumbent,
    Proposer,
    RandomLocalSearch,
    TimeBox,
    optimize,
    perturb,
    sample_uniform,
)


class Recording(Proposer):
    """Wraps RandomLocalSearch and remembers every configuration it handed out."""

    def __init__(self, id: EstimatorId):
        self.inner = RandomLocalSearch(PARAM_SPACES[id])
        self.proposed = []

    def propose(self, index, best_hp, rng):
        hp = self.inner.propose(index, best_hp, rng)
        self.proposed.append(hp)
        return hp


def _noisy_duplicates(seed=0):
    # every x value appears 6 times with labels drawn around a smooth rule, so a
    # single neighbour just echoes noise
    rng = np.random.default_rng(seed)
    base = np.repeat(rng.normal(size=20), 6)
    y = (rng.random(len(base)) < 1.0 / (1.0 + np.exp(-2.0 * base))).astype(float)
    return make_dataset([numeric("x", base)], y)


@pytest.fixture
def setup():
    d = mixed_dataset(90, seed=1)
    return d, make_folds(d, 3, seed=0)


class TestTimeBox:
    def test_wall_clock(self):
        now = [0.0]
        box = TimeBox(5.0, timer=lambda: now[0])
        assert not box.expired()
        now[0] = 5.0
        assert box.expired()

    def test_evaluation_cap_ignores_clock(self):
        box = TimeBox(1e-9, max_evaluations=2, timer=lambda: 1e9)
        assert not box.expired()
        box.record_evaluation()
        box.record_evaluation()
        assert box.expired()


class TestProposals:
    def test_samples_stay_in_space(self):
        rng = np.random.default_rng(0)
        for id, space in PARAM_SPACES.items():
            for _ in range(50):
                hp = sample_uniform(space, rng)
                assert all(spec.contains(hp[spec.name]) for spec in space), (id, hp)

    def test_perturbations_stay_in_space(self):
        rng = np.random.default_rng(1)
        for id, space in PARAM_SPACES.items():
            hp = default_hyperparams(id)
            for _ in range(50):
                hp = perturb(space, hp, rng)
                assert all(spec.contains(hp[spec.name]) for spec in space), (id, hp)


class TestOptimize:
    def test_single_evaluation_returns_default(self, setup):
        d, folds = setup
        pv, inc = optimize(d, folds, EstimatorId.KNN, TimeBox(60, max_evaluations=1), None, seed=0)
        assert pv.hyperparams == default_hyperparams(EstimatorId.KNN)
        assert inc.best_hp == pv.hyperparams
        assert inc.best_cv_error == pv.cv_error

    def test_non_positive_box(self, setup):
        d, folds = setup
        with pytest.raises(HpoTimeout):
            optimize(d, folds, EstimatorId.KNN, TimeBox(0.0), None, seed=0)

    def test_unbeatable_incumbent_is_kept(self, setup):
        d, folds = setup
        old = Incumbent(EstimatorId.KNN, {"k": 7, "weighting": "uniform"}, -1.0)
        pv, inc = optimize(d, folds, EstimatorId.KNN, TimeBox(60, max_evaluations=4), old, seed=0)
        assert inc is old
        assert pv.cv_error >= 0.0

    def test_incumbent_point_is_evaluated_second(self, setup):
        d, folds = setup
        warm = {"k": 15, "weighting": "inverse_distance"}
        old = Incumbent(EstimatorId.KNN, warm, 1.0)
        pv, _ = optimize(d, folds, EstimatorId.KNN, TimeBox(60, max_evaluations=2), old, seed=0)
        default = cv_predict(EstimatorId.KNN, None, d, folds, 0)
        incumbent = cv_predict(EstimatorId.KNN, warm, d, folds, 0)
        assert pv.cv_error == min(default.cv_error, incumbent.cv_error)

    def test_result_is_best_of_all_evaluations(self, setup):
        d, folds = setup
        recorder = Recording(EstimatorId.KNN)
        pv, _ = optimize(
            d, folds, EstimatorId.KNN, TimeBox(60, max_evaluations=6), None, seed=3, proposer=recorder
        )
        evaluated = [default_hyperparams(EstimatorId.KNN)] + recorder.proposed
        errors = [cv_predict(EstimatorId.KNN, hp, d, folds, 3).cv_error for hp in evaluated]
        assert pv.cv_error == min(errors)

    def test_noisy_duplicates_prefer_more_neighbours(self):
        d = _noisy_duplicates()
        folds = make_folds(d, 3, seed=0)
        old = Incumbent(EstimatorId.KNN, {"k": 1, "weighting": "uniform"}, 1.0)
        pv, _ = optimize(d, folds, EstimatorId.KNN, TimeBox(60, max_evaluations=12), old, seed=0)
        assert pv.hyperparams["k"] > 1

    def test_every_evaluation_failing(self):
        d = make_dataset([], [0, 1] * 6)
        folds = make_folds(d, 3, seed=0)
        with pytest.raises(HpoTimeout):
            optimize(d, folds, EstimatorId.KNN, TimeBox(60, max_evaluations=3), None, seed=0)

    def test_deterministic_under_evaluation_cap(self, setup):
        d, folds = setup
        a, _ = optimize(d, folds, EstimatorId.LOGISTIC_REGRESSION, TimeBox(60, max_evaluations=4), None, seed=5)
        b, _ = optimize(d, folds, EstimatorId.LOGISTIC_REGRESSION, TimeBox(60, max_evaluations=4), None, seed=5)
        assert a.hyperparams == b.hyperparams
        np.testing.assert_array_equal(a.values, b.values)
