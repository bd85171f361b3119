import numpy as np
import pytest

from conftest import categorical, make_dataset, mixed_dataset, numeric
from explorer.data_utils import (
    MISSING_CATEGORY,
    ColumnKind,
    Task,
    derive_rng,
    derive_seed,
    holdout_split,
    load_csv,
    make_folds,
    write_csv,
)
from explorer.errors import DataError


def _write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestLoadCsv:
    def test_minimal_binary_file(self, tmp_path):
        path = _write(tmp_path, "a,b,y\n1,x,0\n2,y,1\n3,x,1\n")
        d = load_csv(path, "y")
        assert d.column_names == ["a", "b"]
        assert d.task is Task.BINARY
        assert d.n_rows == 3
        assert d.column("a").kind is ColumnKind.NUMERIC
        assert d.column("b").kind is ColumnKind.CATEGORICAL

    def test_one_unparseable_cell_makes_categorical(self, tmp_path):
        path = _write(tmp_path, "c,y\n1.5,0\n2,1\nx,0\n")
        assert load_csv(path, "y").column("c").kind is ColumnKind.CATEGORICAL

    def test_missing_target_column(self, tmp_path):
        path = _write(tmp_path, "a,b\n1,2\n")
        with pytest.raises(DataError, match="target"):
            load_csv(path, "y")

    def test_zero_rows(self, tmp_path):
        path = _write(tmp_path, "a,y\n")
        with pytest.raises(DataError):
            load_csv(path, "y")

    def test_unparseable_regression_target(self, tmp_path):
        path = _write(tmp_path, "a,y\n1,2.5\n2,abc\n")
        with pytest.raises(DataError):
            load_csv(path, "y", task=Task.REGRESSION)

    def test_missing_cells_are_imputed(self, tmp_path):
        path = _write(tmp_path, "a,b,y\n1,x,0\nNA,?,1\n5,,0\n3,x,1\n")
        d = load_csv(path, "y")
        a, b = d.column("a"), d.column("b")
        assert a.missing_mask.tolist() == [False, True, False, False]
        assert a.values[1] == pytest.approx(3.0)  # median of 1, 5, 3
        assert b.missing_mask.tolist() == [False, True, True, False]
        assert b.values[1] == MISSING_CATEGORY

    def test_datetime_columns_expand(self, tmp_path):
        path = _write(tmp_path, "when,y\n2024-01-15T10:00:00,0\n2024-03-02T23:30:00,1\n")
        d = load_csv(path, "y")
        assert d.has_datetime
        assert d.column_names == ["when_year", "when_month", "when_dow", "when_hour"]
        assert d.column("when_month").values.tolist() == [1.0, 3.0]
        assert d.column("when_hour").values.tolist() == [10.0, 23.0]

    def test_declared_kinds_override_inference(self, tmp_path):
        path = _write(tmp_path, "zip,y\n10001,0\n10002,1\n")
        d = load_csv(path, "y", declared_kinds={"zip": ColumnKind.CATEGORICAL})
        assert d.column("zip").kind is ColumnKind.CATEGORICAL

    def test_string_labels_map_in_sorted_order(self, tmp_path):
        path = _write(tmp_path, "a,y\n1,yes\n2,no\n3,yes\n")
        d = load_csv(path, "y", task=Task.BINARY)
        assert d.target.values.tolist() == [1.0, 0.0, 1.0]

    def test_write_then_load_keeps_cells_and_masks(self, tmp_path):
        d = mixed_dataset(30)
        path = str(tmp_path / "round.csv")
        write_csv(d, path)
        kinds = {c.name: c.kind for c in d.columns}
        back = load_csv(path, "y", declared_kinds=kinds)
        assert back.column_names == d.column_names
        for col in d.columns:
            np.testing.assert_array_equal(back.column(col.name).values, col.values)
            np.testing.assert_array_equal(back.column(col.name).missing_mask, col.missing_mask)
        np.testing.assert_array_equal(back.target.values, d.target.values)

    def test_numeric_cells_read_back_bit_exact(self, tmp_path):
        rng = np.random.default_rng(11)
        x = np.concatenate([rng.normal(size=500), rng.uniform(-1e-300, 1e300, size=500), [0.1, 1 / 3, -2.5e-8]])
        d = make_dataset([numeric("x", x)], (np.arange(len(x)) % 2).astype(float))
        path = str(tmp_path / "bits.csv")
        write_csv(d, path)
        back = load_csv(path, "y").column("x").values
        assert back.tobytes() == x.tobytes()


class TestHoldoutSplit:
    def test_sizes(self):
        d = mixed_dataset(100)
        train, test = holdout_split(d, 0.33, seed=1)
        assert (train.n_rows, test.n_rows) == (67, 33)

    def test_deterministic(self):
        d = mixed_dataset(100)
        a = holdout_split(d, 0.33, seed=1)[1]
        b = holdout_split(d, 0.33, seed=1)[1]
        np.testing.assert_array_equal(a.column("x1").values, b.column("x1").values)

    def test_balanced_twelve_rows(self):
        y = [0, 1] * 6
        d = make_dataset([numeric("x", np.arange(12))], y)
        train, test = holdout_split(d, 0.33, seed=3)
        assert test.n_rows == 4
        assert test.target.values.sum() == 2

    def test_disjoint_and_exhaustive(self):
        d = make_dataset([numeric("x", np.arange(50))], [0, 1] * 25)
        train, test = holdout_split(d, 0.33, seed=7)
        rows = np.concatenate([train.column("x").values, test.column("x").values])
        assert sorted(rows.tolist()) == list(range(50))

    def test_class_left_empty_in_train(self):
        y = [0] * 11 + [1]
        d = make_dataset([numeric("x", np.arange(12))], y)
        with pytest.raises(DataError):
            holdout_split(d, 0.9, seed=0)

    def test_too_few_rows(self):
        d = make_dataset([numeric("x", np.arange(9))], [0, 1] * 4 + [0])
        with pytest.raises(DataError):
            holdout_split(d, 0.33, seed=0)


class TestMakeFolds:
    def test_even_division(self):
        d = make_dataset([numeric("x", np.arange(10))], [0, 1] * 5)
        assert make_folds(d, 5, seed=0).sizes() == [2] * 5

    def test_remainder(self):
        d = make_dataset([numeric("x", np.arange(11))], np.arange(11), Task.REGRESSION)
        assert sorted(make_folds(d, 5, seed=0).sizes(), reverse=True) == [3, 2, 2, 2, 2]

    def test_stratified(self):
        d = make_dataset([numeric("x", np.arange(6))], [1, 1, 1, 0, 0, 0])
        plan = make_folds(d, 3, seed=4)
        for f in range(3):
            assert d.target.values[plan.test_rows(f)].sum() == 1

    def test_positive_rate_per_fold(self):
        d = mixed_dataset(97, seed=2)
        plan = make_folds(d, 5, seed=9)
        rate = d.target.values.mean()
        for f in range(5):
            rows = plan.test_rows(f)
            assert abs(d.target.values[rows].mean() - rate) <= 1.0 / len(rows) + 1e-12

    def test_class_count_below_k(self):
        d = make_dataset([numeric("x", np.arange(10))], [1, 1] + [0] * 8)
        with pytest.raises(DataError):
            make_folds(d, 3, seed=0)

    def test_partition(self):
        d = mixed_dataset(40)
        plan = make_folds(d, 4, seed=0)
        rows = np.concatenate([plan.test_rows(f) for f in range(4)])
        assert sorted(rows.tolist()) == list(range(40))


class TestNamedRng:
    def test_same_names_same_stream(self):
        assert derive_seed(5, "a", 1) == derive_seed(5, "a", 1)
        np.testing.assert_array_equal(derive_rng(5, "x").random(4), derive_rng(5, "x").random(4))

    def test_different_names_differ(self):
        assert derive_seed(5, "a") != derive_seed(5, "b")


class TestDataset:
    def test_duplicate_column_names(self):
        with pytest.raises(DataError):
            make_dataset([numeric("x", [1, 2]), categorical("x", ["a", "b"])], [0, 1])

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            make_dataset([numeric("x", [1, 2, 3])], [0, 1])

    def test_non_binary_classification_target(self):
        with pytest.raises(DataError):
            make_dataset([numeric("x", [1, 2])], [0, 2])
