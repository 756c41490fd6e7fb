from __future__ import annotations

import math

import numpy as np
import pytest

from stackgen.data import Instance
from stackgen.learners import TreeParams, check_prob_vector, leaf_class_probs, train_tree, tree_class_probs

from conftest import make_dataset, make_schema


def entropy(counts):
    counts = np.asarray(counts, dtype=float)
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log2(p)).sum())


def gain_ratio_binary(labels, feature):
    """Direct-from-definition oracle for a binary feature split."""
    labels = np.asarray(labels)
    feature = np.asarray(feature)
    n = labels.size
    total = entropy(np.bincount(labels))
    weighted = 0.0
    split_info = 0.0
    for v in (0, 1):
        mask = feature == v
        frac = mask.sum() / n
        weighted += frac * entropy(np.bincount(labels[mask]))
        split_info -= frac * math.log2(frac)
    gain = total - weighted
    return gain, gain / split_info


class TestLeafProbs:
    def test_majority_formula(self):
        # counts (8, 2): majority keeps 1 - 3/12 = 0.75, the rest go to class 1
        assert np.array_equal(leaf_class_probs([8, 2]), np.array([0.75, 0.25]))

    def test_pure_leaf_shares_residual(self):
        # counts (5, 0): majority 1 - 1/7, the single other class receives 1/7
        probs = leaf_class_probs([5, 0])
        assert probs == pytest.approx([6 / 7, 1 / 7])

    def test_pure_leaf_three_classes(self):
        probs = leaf_class_probs([4, 0, 0])
        assert probs[0] == pytest.approx(1 - 1 / 6)
        assert probs[1] == probs[2] == pytest.approx(1 / 12)

    def test_tie_breaks_to_lowest_class(self):
        probs = leaf_class_probs([1, 1, 0])
        assert np.argmax(probs) == 0
        assert probs.sum() == 1.0

    def test_mass_conservation_exact(self):
        for counts in ([8, 2], [5, 3, 2], [7, 1, 1, 1], [2, 2, 3]):
            probs = leaf_class_probs(counts)
            maj = int(np.argmax(counts))
            assert probs[np.arange(len(counts)) != maj].sum() == 1.0 - probs[maj]


class TestTraining:
    def test_pure_dataset_yields_single_leaf(self):
        schema = make_schema(n_nominal=2, nominal_values=("0", "1"))
        data = make_dataset(schema, [[0, 1], [1, 0], [1, 1]], [0, 0, 0])
        model = train_tree(data)
        assert model.root.is_leaf
        assert np.argmax(model.root.counts) == 0

    def test_xor_fits_exactly_before_pruning(self):
        # 4 distinct rows, labels = xor of the two bits; needs depth 2
        schema = make_schema(n_nominal=2, nominal_values=("0", "1"))
        data = make_dataset(schema, [[0, 0], [0, 1], [1, 0], [1, 1]], [0, 1, 1, 0])
        model = train_tree(data, TreeParams(min_branch=1, prune=False))
        preds = np.argmax(model.probs_batch(data.x), axis=1)
        assert np.array_equal(preds, data.y)

    def test_root_uses_highest_gain_ratio_attribute(self):
        # attribute 0 separates the classes perfectly, attribute 1 only partially
        labels = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1]
        attr0 = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1]
        attr1 = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1]
        g0, r0 = gain_ratio_binary(labels, attr0)
        g1, r1 = gain_ratio_binary(labels, attr1)
        assert r0 > r1 and g0 > g1
        schema = make_schema(n_nominal=2, nominal_values=("0", "1"))
        data = make_dataset(schema, list(zip(attr0, attr1)), labels)
        model = train_tree(data)
        assert model.root.attr == 0

    def test_continuous_threshold_is_midpoint(self):
        schema = make_schema(n_continuous=1)
        data = make_dataset(schema, [[0.0], [1.0], [2.0], [3.0]], [0, 0, 1, 1])
        model = train_tree(data, TreeParams(prune=False))
        assert model.root.attr == 0
        assert model.root.threshold == pytest.approx(1.5)

    def test_empty_dataset_rejected(self):
        schema = make_schema(n_continuous=1)
        data = make_dataset(schema, np.zeros((0, 1)), [])
        with pytest.raises(ValueError):
            train_tree(data)

    def test_deterministic(self, rng):
        from conftest import random_mixed_dataset

        data = random_mixed_dataset(rng, n=80)
        a = train_tree(data)
        b = train_tree(data)
        assert np.array_equal(a.probs_batch(data.x), b.probs_batch(data.x))

    def test_pruning_shrinks_noisy_tree(self, rng):
        # labels independent of the attributes: pruning should collapse structure
        schema = make_schema(n_continuous=3)
        x = rng.normal(size=(120, 3))
        y = rng.integers(0, 2, size=120)
        data = make_dataset(schema, x, y)
        grown = train_tree(data, TreeParams(prune=False))
        pruned = train_tree(data, TreeParams(prune=True))
        assert pruned.n_leaves() <= grown.n_leaves()
        assert pruned.n_leaves() < 10


class TestPrediction:
    def test_formula_on_fitted_leaf(self):
        # one binary attribute splitting 8/2 against 2/8
        schema = make_schema(n_nominal=1, nominal_values=("0", "1"))
        rows = [[0]] * 10 + [[1]] * 10
        labels = [0] * 8 + [1] * 2 + [1] * 8 + [0] * 2
        data = make_dataset(schema, rows, labels)
        model = train_tree(data, TreeParams(prune=False))
        probs = tree_class_probs(model, Instance((0,)))
        assert np.array_equal(probs, [0.75, 0.25])

    def test_unseen_nominal_value_falls_back_to_node_counts(self):
        schema = make_schema(n_nominal=2, nominal_values=("a", "b", "c"))
        # value "c" of attribute 0 never appears in training
        data = make_dataset(schema, [[0, 0], [0, 1], [1, 0], [1, 1]] * 3,
                            [0, 0, 1, 1] * 3)
        model = train_tree(data, TreeParams(prune=False))
        if model.root.attr == 0:
            probs = model.probs_batch(np.array([[2.0, 0.0]]))[0]
            assert probs == pytest.approx(leaf_class_probs(model.root.counts))

    def test_probs_batch_matches_single(self, rng):
        from conftest import random_mixed_dataset

        data = random_mixed_dataset(rng, n=100)
        model = train_tree(data)
        batch = model.probs_batch(data.x)
        for i in range(0, 100, 17):
            single = tree_class_probs(model, data.instance(i))
            assert np.array_equal(single, batch[i])

    def test_prob_vectors_valid(self, rng):
        from conftest import random_mixed_dataset

        data = random_mixed_dataset(rng, n=150, n_classes=4, n_values=4)
        model = train_tree(data)
        queries = np.hstack([
            rng.normal(size=(300, 3)),
            rng.integers(0, 4, size=(300, 2)).astype(float),
        ])
        for row in model.probs_batch(queries):
            check_prob_vector(row, 4)


class TestSerialization:
    def test_round_trip_predictions(self, rng):
        from conftest import random_mixed_dataset
        from stackgen.learners import TreeModel

        data = random_mixed_dataset(rng, n=90)
        model = train_tree(data)
        clone = TreeModel.from_dict(model.to_dict())
        assert np.array_equal(clone.probs_batch(data.x), model.probs_batch(data.x))
