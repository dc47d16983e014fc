import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scorecard.data import (
    DataError,
    Dataset,
    binarize,
    class_weights,
    load_csv,
    save_csv,
)

from conftest import toy_dataset


def write_csv(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_three_row_counts(self, tmp_path):
        path = write_csv(tmp_path, "y,a,b\n1,0.5,1\n-1,2,3\n1,0,0\n")
        ds = load_csv(path, "y")
        assert (ds.n, ds.n_pos, ds.n_neg) == (3, 2, 1)
        assert np.all(ds.features[:, 0] == 1.0)
        assert ds.feature_names == ("(Intercept)", "a", "b")

    def test_bundled_bankruptcy_shape(self):
        from importlib.resources import files

        path = files("scorecard.datasets") / "bankruptcy.csv"
        ds = load_csv(path, "y")
        assert ds.n == 250
        assert ds.p == 6

    def test_zero_one_labels_mapped(self, tmp_path):
        path = write_csv(tmp_path, "y,a\n1,0\n0,1\n")
        ds = load_csv(path, "y")
        assert list(ds.labels) == [1, -1]

    def test_bad_label_value_rejected(self, tmp_path):
        path = write_csv(tmp_path, "y,a\n1,0\n2,1\n")
        with pytest.raises(DataError, match="binary"):
            load_csv(path, "y")

    def test_malformed_row_reports_line(self, tmp_path):
        path = write_csv(tmp_path, "y,a\n1,0\n-1,zebra\n")
        with pytest.raises(DataError, match=":3"):
            load_csv(path, "y")

    def test_missing_cells_imputed_and_counted(self, tmp_path):
        path = write_csv(tmp_path, "y,a\n1,2\n-1,\n1,4\n")
        ds = load_csv(path, "y")
        assert ds.features[1, 1] == pytest.approx(3.0)
        assert ds.missing_counts == (0, 1)

    def test_empty_dataset_rejected(self, tmp_path):
        path = write_csv(tmp_path, "y,a\n")
        with pytest.raises(DataError, match="no data rows"):
            load_csv(path, "y")

    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        ds = toy_dataset(rng.normal(size=(17, 3)), rng.choice([-1, 1], size=17))
        out = tmp_path / "round.csv"
        save_csv(ds, out)
        back = load_csv(out, "y")
        assert np.array_equal(back.features, ds.features)
        assert np.array_equal(back.labels, ds.labels)


class TestDatasetInvariants:
    def test_label_domain_enforced(self):
        with pytest.raises(DataError):
            toy_dataset([[1.0]], [2])

    def test_intercept_column_enforced(self):
        with pytest.raises(DataError):
            Dataset(features=np.zeros((2, 2)), labels=np.array([1, -1]),
                    feature_names=("(Intercept)", "a"))

    def test_duplicate_names_rejected(self):
        with pytest.raises(DataError):
            Dataset(features=np.ones((2, 2)), labels=np.array([1, -1]),
                    feature_names=("a", "a"))

    def test_index_sets_partition(self, rng):
        ds = toy_dataset(rng.normal(size=(9, 2)), rng.choice([-1, 1], size=9))
        merged = sorted([*ds.positive_indices, *ds.negative_indices])
        assert merged == list(range(9))
        assert ds.n_pos + ds.n_neg == ds.n


class TestBinarize:
    def test_threshold_rule_definition(self):
        ds = toy_dataset([[20.0], [30.0], [70.0]], [1, -1, 1], names=["age"])
        out, rules = binarize(ds, {"age": {"thresholds": [25]}})
        assert list(out.features[:, 1]) == [0.0, 1.0, 1.0]
        assert out.feature_names[1] == "age>=25"
        assert rules.rules[0].source == "age"

    def test_categorical_one_hot(self):
        ds = toy_dataset([[0.0], [1.0], [0.0]], [1, -1, 1], names=["c"])
        out, rules = binarize(ds, {"c": "categories"})
        cols = out.features[:, 1:]
        assert cols.shape[1] == 2
        # mutually exclusive and exhaustive
        assert np.all(cols.sum(axis=1) == 1.0)

    def test_midpoints_yield_n_minus_one_thresholds(self):
        ds = toy_dataset([[1.0], [2.0], [5.0], [9.0]], [1, -1, 1, -1], names=["v"])
        out, rules = binarize(ds, {"v": "midpoints"})
        assert len(rules.thresholds["v"]) == 3
        assert out.p == 3

    def test_threshold_monotone_in_v(self):
        rng = np.random.default_rng(1)
        vals = rng.normal(size=20)
        ds = toy_dataset(vals[:, None], rng.choice([-1, 1], size=20), names=["v"])
        out, _ = binarize(ds, {"v": {"thresholds": [-0.5, 0.5]}})
        low, high = out.features[:, 1], out.features[:, 2]
        assert np.all(low >= high)

    def test_out_of_range_threshold_warns_constant(self):
        ds = toy_dataset([[1.0], [2.0]], [1, -1], names=["v"])
        with pytest.warns(UserWarning, match="constant"):
            _, rules = binarize(ds, {"v": {"thresholds": [99.0]}})
        assert rules.rules[0].constant

    def test_binary_passthrough_unchanged(self):
        ds = toy_dataset([[0.0, 3.0], [1.0, 4.0]], [1, -1], names=["b", "r"])
        out, _ = binarize(ds, {"r": "midpoints"})
        assert out.feature_names[1] == "b"
        assert np.array_equal(out.features[:, 1], ds.features[:, 1])


class TestClassWeights:
    def test_balanced_formula(self):
        ds = toy_dataset(np.zeros((400, 1)),
                         [1] * 100 + [-1] * 300)
        w = class_weights(ds, "balanced")
        assert w.w_pos == pytest.approx(0.75)
        assert w.w_neg == pytest.approx(0.25)

    def test_balanced_equalizes_class_mass(self, rng):
        labels = rng.choice([-1, 1], size=37)
        if np.all(labels == labels[0]):
            labels[0] = -labels[0]
        ds = toy_dataset(np.zeros((37, 1)), labels)
        w = class_weights(ds, "balanced")
        assert abs(w.w_pos * ds.n_pos - w.w_neg * ds.n_neg) < 1e-12

    def test_max_sensitivity(self):
        ds = toy_dataset(np.zeros((8, 1)), [1, 1, 1, 1, -1, -1, -1, -1])
        w = class_weights(ds, "max_sensitivity")
        assert w.w_pos == pytest.approx(4 / 5)

    def test_single_class_rejected(self):
        ds = toy_dataset(np.zeros((3, 1)), [1, 1, 1])
        with pytest.raises(DataError):
            class_weights(ds, "balanced")

    def test_custom_passthrough(self):
        ds = toy_dataset(np.zeros((3, 1)), [1, 1, -1])
        w = class_weights(ds, "custom", w_pos=0.9)
        assert (w.w_pos, w.w_neg) == (0.9, pytest.approx(0.1))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(min_value=-50, max_value=50), min_size=2, max_size=30,
                unique=True))
def test_binarize_midpoints_separate_distinct_values(values):
    n = len(values)
    labels = [1 if i % 2 == 0 else -1 for i in range(n)]
    ds = toy_dataset(np.array(values)[:, None], labels, names=["v"])
    out, rules = binarize(ds, {"v": "midpoints"})
    assert len(rules.thresholds["v"]) == n - 1
    # each adjacent pair of sorted values is separated by some rule column
    order = np.argsort(values)
    body = out.features[:, 1:]
    for a, b in zip(order[:-1], order[1:]):
        assert np.any(body[a] != body[b])
