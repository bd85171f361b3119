import numpy as np
import pytest

from explorer.data_utils import Task
from explorer.errors import DataError
from explorer.metric_utils import auc, error_reduction, metric_name, rmse, score

# (dataset, baseline AUC, explored AUC, reported error reduction in percent)
KNOWN_REDUCTIONS = [
    ("pc2", 0.5000, 0.8823, 76.46),
    ("numerai28.6", 0.5079, 0.5605, 10.69),
    ("mc1", 0.5789, 0.8475, 63.79),
    ("Hyperplane_10_1E-3", 0.6618, 0.7812, 35.31),
    ("bank-marketing", 0.6634, 0.9512, 85.49),
    ("CreditCardSubset", 0.6665, 0.7272, 18.20),
    ("BNG(credit-g)", 0.7043, 0.8952, 64.57),
    ("bank32nh", 0.7061, 0.9169, 71.73),
    ("puma32H", 0.7898, 0.9883, 94.42),
    ("kin8nm", 0.8055, 0.9741, 86.68),
]


def _pairwise_auc(scores, labels):
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    return wins / (len(pos) * len(neg))


class TestAuc:
    def test_small_example(self):
        assert auc(np.array([0.1, 0.4, 0.35, 0.8]), np.array([0, 0, 1, 1])) == pytest.approx(0.75)

    def test_all_ties(self):
        assert auc(np.full(6, 0.3), np.array([0, 1, 0, 1, 1, 0])) == pytest.approx(0.5)

    def test_perfect_ranking(self):
        assert auc(np.array([0.1, 0.2, 0.9]), np.array([0, 0, 1])) == 1.0

    def test_single_class(self):
        with pytest.raises(DataError):
            auc(np.array([0.2, 0.4]), np.array([1, 1]))

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            auc(np.array([0.2, 0.4, 0.5]), np.array([0, 1]))

    def test_matches_pairwise_count(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(2, 40))
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            # coarse grid so ties are common
            scores = rng.integers(0, 6, size=n) / 5.0
            assert auc(scores, labels) == pytest.approx(_pairwise_auc(scores, labels), abs=1e-12)

    def test_invariant_under_monotone_maps(self):
        rng = np.random.default_rng(1)
        scores = rng.normal(size=50)
        labels = (scores + rng.normal(size=50) > 0).astype(int)
        base = auc(scores, labels)
        assert auc(np.exp(scores), labels) == pytest.approx(base)
        assert auc(3.0 * scores - 2.0, labels) == pytest.approx(base)


class TestRmse:
    def test_example(self):
        assert rmse(np.array([0.0, 0.0]), np.array([3.0, 4.0])) == pytest.approx(3.5355, abs=1e-4)

    def test_perfect(self):
        assert rmse(np.array([1.5, 2.0]), np.array([1.5, 2.0])) == 0.0


class TestScore:
    def test_dispatch(self):
        assert metric_name(Task.BINARY) == "auc"
        assert metric_name(Task.REGRESSION) == "rmse"
        y = np.array([0.0, 1.0])
        assert score(Task.BINARY, np.array([0.2, 0.7]), y) == 1.0
        assert score(Task.REGRESSION, np.array([0.0, 0.0]), np.array([3.0, 4.0])) == pytest.approx(12.5**0.5)


class TestErrorReduction:
    @pytest.mark.parametrize("name,base,explored,reported", KNOWN_REDUCTIONS)
    def test_known_reductions(self, name, base, explored, reported):
        reduction = error_reduction(base, explored, Task.BINARY)
        assert 100.0 * reduction == pytest.approx(reported, abs=0.015), name

    def test_no_change(self):
        assert error_reduction(0.8, 0.8, Task.BINARY) == 0.0

    def test_regression_uses_rmse(self):
        assert error_reduction(2.0, 1.5, Task.REGRESSION) == pytest.approx(0.25)

    def test_perfect_baseline_is_undefined(self):
        assert error_reduction(1.0, 1.0, Task.BINARY) is None
        assert error_reduction(0.0, 0.0, Task.REGRESSION) is None

    def test_worse_than_baseline_is_negative(self):
        assert error_reduction(0.8, 0.7, Task.BINARY) == pytest.approx(-0.5)
