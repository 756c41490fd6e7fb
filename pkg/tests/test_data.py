from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stackgen.data import (
    Attribute,
    AttributeKind,
    Dataset,
    Instance,
    Schema,
    load_csv,
    load_schema,
    save_csv,
    save_schema,
    split,
    stratified_folds,
)

from conftest import make_dataset, make_schema


class TestAttributeKind:
    def test_nominal_requires_values(self):
        with pytest.raises(ValueError):
            AttributeKind.nominal([])

    def test_duplicate_values_rejected(self):
        with pytest.raises(ValueError):
            AttributeKind.nominal(["x", "x"])

    def test_binary_is_two_valued_nominal(self):
        kind = AttributeKind.binary("no", "yes")
        assert kind.is_binary and kind.is_nominal and not kind.is_continuous

    def test_with_missing_extends_once(self):
        kind = AttributeKind.nominal(["red", "blue"])
        extended = kind.with_missing()
        assert extended.values == ("red", "blue", "?")
        assert extended.with_missing() is extended


class TestSchema:
    def test_needs_two_classes(self):
        with pytest.raises(ValueError):
            Schema((), ("only",))

    def test_duplicate_attribute_names_rejected(self):
        a = Attribute("x", AttributeKind.continuous())
        with pytest.raises(ValueError):
            Schema((a, a), ("A", "B"))


class TestDataset:
    def test_nominal_code_out_of_range(self):
        schema = make_schema(n_nominal=1)
        with pytest.raises(ValueError):
            make_dataset(schema, [[5.0]], [0])

    def test_rejects_non_finite(self):
        schema = make_schema(n_continuous=1)
        with pytest.raises(ValueError):
            make_dataset(schema, [[float("nan")]], [0])

    def test_arrays_are_read_only(self):
        schema = make_schema(n_continuous=1)
        data = make_dataset(schema, [[1.0], [2.0]], [0, 1])
        with pytest.raises(ValueError):
            data.x[0, 0] = 9.0

    def test_instance_round_trip(self):
        schema = make_schema(n_continuous=1, n_nominal=1)
        data = make_dataset(schema, [[1.5, 1.0]], [1])
        inst = data.instance(0)
        assert inst == Instance((1.5, 1), 1)
        again = Dataset.from_instances(schema, [inst])
        assert np.array_equal(again.x, data.x) and np.array_equal(again.y, data.y)

    def test_missing_cell_rejected_outside_loading(self):
        schema = make_schema(n_continuous=1)
        with pytest.raises(ValueError, match="missing"):
            Dataset.from_instances(schema, [Instance((None,), 0)])


class TestLoadCsv:
    def test_round_trip_fixture(self, tmp_path):
        schema = Schema(
            (Attribute("len", AttributeKind.continuous()),
             Attribute("color", AttributeKind.nominal(["red", "blue"]))),
            ("A", "B"),
        )
        path = tmp_path / "d.csv"
        path.write_text("1.0,red,A\n2.0,blue,B\n")
        data = load_csv(path, schema)
        assert len(data) == 2
        assert list(data.y) == [0, 1]
        assert data.x[0, 1] == 0 and data.x[1, 1] == 1

    def test_continuous_missing_imputed_to_column_mean(self, tmp_path):
        schema = Schema((Attribute("v", AttributeKind.continuous()),), ("A", "B"))
        path = tmp_path / "d.csv"
        path.write_text("1.0,A\n?,B\n2.0,A\n")
        data = load_csv(path, schema)
        assert data.x[1, 0] == pytest.approx(1.5)

    def test_nominal_missing_gets_extra_category(self, tmp_path):
        schema = Schema((Attribute("c", AttributeKind.nominal(["red", "blue"])),), ("A", "B"))
        path = tmp_path / "d.csv"
        path.write_text("red,A\n?,B\n")
        data = load_csv(path, schema)
        assert data.schema.attributes[0].kind.values == ("red", "blue", "?")
        assert data.x[1, 0] == 2

    def test_unknown_nominal_value(self, tmp_path):
        schema = Schema((Attribute("c", AttributeKind.nominal(["red", "blue"])),), ("A", "B"))
        path = tmp_path / "d.csv"
        path.write_text("green,A\n")
        with pytest.raises(ValueError, match="unknown nominal value"):
            load_csv(path, schema)

    def test_width_mismatch(self, tmp_path):
        schema = Schema((Attribute("v", AttributeKind.continuous()),), ("A", "B"))
        path = tmp_path / "d.csv"
        path.write_text("1.0,2.0,A\n")
        with pytest.raises(ValueError, match="columns"):
            load_csv(path, schema)

    def test_unparseable_number(self, tmp_path):
        schema = Schema((Attribute("v", AttributeKind.continuous()),), ("A", "B"))
        path = tmp_path / "d.csv"
        path.write_text("abc,A\n")
        with pytest.raises(ValueError, match="cannot parse"):
            load_csv(path, schema)

    def test_header_skipped_when_flagged(self, tmp_path):
        schema = Schema((Attribute("v", AttributeKind.continuous()),), ("A", "B"))
        path = tmp_path / "d.csv"
        path.write_text("v,class\n1.0,A\n")
        assert len(load_csv(path, schema, has_header=True)) == 1

    def test_save_load_round_trip(self, tmp_path, rng):
        schema = make_schema(n_continuous=2, n_nominal=1, nominal_values=("x", "y", "z"))
        x = np.hstack([rng.normal(size=(20, 2)), rng.integers(0, 3, size=(20, 1)).astype(float)])
        data = Dataset(schema, x, rng.integers(0, 2, size=20))
        save_csv(data, tmp_path / "d.csv")
        back = load_csv(tmp_path / "d.csv", schema)
        assert np.array_equal(back.x, data.x)
        assert np.array_equal(back.y, data.y)


class TestSchemaSidecar:
    def test_round_trip(self, tmp_path):
        schema = Schema(
            (Attribute("len", AttributeKind.continuous()),
             Attribute("flag", AttributeKind.binary("n", "y")),
             Attribute("color", AttributeKind.nominal(["r", "g", "b"]))),
            ("A", "B", "C"),
        )
        save_schema(schema, tmp_path / "s.schema")
        assert load_schema(tmp_path / "s.schema") == schema

    def test_missing_class_line(self, tmp_path):
        (tmp_path / "s.schema").write_text("x:continuous\n")
        with pytest.raises(ValueError, match="class"):
            load_schema(tmp_path / "s.schema")

    def test_binary_must_have_two_values(self, tmp_path):
        (tmp_path / "s.schema").write_text("x:binary:a|b|c\nclass:A|B\n")
        with pytest.raises(ValueError):
            load_schema(tmp_path / "s.schema")


def _fold_class_counts(data, plan):
    counts = np.zeros((plan.n_folds, data.n_classes), dtype=int)
    for fold in range(plan.n_folds):
        idx = plan.test_indices(fold)
        counts[fold] = np.bincount(data.y[idx], minlength=data.n_classes)
    return counts


class TestStratifiedFolds:
    def test_exact_divisibility(self):
        schema = make_schema(n_continuous=1)
        data = make_dataset(schema, [[float(i)] for i in range(10)], [0] * 5 + [1] * 5)
        plan = stratified_folds(data, 5, seed=0)
        counts = _fold_class_counts(data, plan)
        assert np.all(counts == 1)

    def test_uneven_split_balanced(self):
        # 7 instances (4 A, 3 B) into 3 folds: sizes {3,2,2}, per-class spread <= 1
        schema = make_schema(n_continuous=1)
        data = make_dataset(schema, [[float(i)] for i in range(7)], [0, 0, 0, 0, 1, 1, 1])
        plan = stratified_folds(data, 3, seed=7)
        assert sorted(plan.fold_sizes()) == [2, 2, 3]
        counts = _fold_class_counts(data, plan)
        assert counts.sum() == 7
        for c in range(2):
            assert counts[:, c].max() - counts[:, c].min() <= 1

    def test_fold_count_out_of_range(self):
        schema = make_schema(n_continuous=1)
        data = make_dataset(schema, [[float(i)] for i in range(10)], [0] * 5 + [1] * 5)
        with pytest.raises(ValueError):
            stratified_folds(data, 11, seed=0)
        with pytest.raises(ValueError):
            stratified_folds(data, 1, seed=0)

    def test_deterministic_for_fixed_seed(self):
        schema = make_schema(n_continuous=1, classes=("A", "B", "C"))
        data = make_dataset(schema, [[float(i)] for i in range(30)], [i % 3 for i in range(30)])
        a = stratified_folds(data, 4, seed=9)
        b = stratified_folds(data, 4, seed=9)
        assert np.array_equal(a.assignment, b.assignment)

    @settings(max_examples=60, deadline=None)
    @given(
        sizes=st.lists(st.integers(min_value=1, max_value=12), min_size=2, max_size=4),
        n_folds=st.integers(min_value=2, max_value=8),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    def test_invariants_hold_generally(self, sizes, n_folds, seed):
        n = sum(sizes)
        if n_folds > n:
            return
        labels = np.concatenate([np.full(s, c) for c, s in enumerate(sizes)])
        classes = tuple(f"C{i}" for i in range(len(sizes)))
        schema = make_schema(n_continuous=1, classes=classes)
        data = make_dataset(schema, [[float(i)] for i in range(n)], labels)
        plan = stratified_folds(data, n_folds, seed)
        sizes_arr = plan.fold_sizes()
        assert sizes_arr.sum() == n
        assert sizes_arr.max() - sizes_arr.min() <= 1
        counts = _fold_class_counts(data, plan)
        assert np.all(counts.max(axis=0) - counts.min(axis=0) <= 1)


class TestSplit:
    def _data(self):
        schema = make_schema(n_continuous=1)
        return make_dataset(schema, [[float(i)] for i in range(10)], [0] * 5 + [1] * 5)

    def test_partition_identity(self):
        data = self._data()
        plan = stratified_folds(data, 5, seed=1)
        train, test = split(data, plan, 0)
        assert len(train) == 8 and len(test) == 2
        merged = sorted(np.concatenate([train.x[:, 0], test.x[:, 0]]))
        assert merged == sorted(data.x[:, 0])

    def test_union_of_test_sets_is_dataset(self):
        data = self._data()
        plan = stratified_folds(data, 5, seed=1)
        collected = np.concatenate([split(data, plan, j)[1].x[:, 0] for j in range(5)])
        assert sorted(collected) == sorted(data.x[:, 0])

    def test_fold_out_of_range(self):
        data = self._data()
        plan = stratified_folds(data, 5, seed=1)
        with pytest.raises(ValueError):
            split(data, plan, 5)
