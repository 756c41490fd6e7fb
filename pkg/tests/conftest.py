from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

from stackgen.data import Attribute, AttributeKind, Dataset, Schema


def make_schema(n_continuous=0, n_nominal=0, nominal_values=("a", "b"), classes=("A", "B")):
    attrs = [Attribute(f"c{i}", AttributeKind.continuous()) for i in range(n_continuous)]
    attrs += [Attribute(f"n{i}", AttributeKind.nominal(nominal_values)) for i in range(n_nominal)]
    return Schema(tuple(attrs), tuple(classes))


def make_dataset(schema, rows, labels=None):
    x = np.asarray(rows, dtype=float).reshape(len(rows), schema.n_attributes)
    y = None if labels is None else np.asarray(labels, dtype=np.int64)
    return Dataset(schema, x, y)


class _ConstantModel:
    def __init__(self, class_index, n_classes):
        self.class_index = class_index
        self.n_classes = n_classes

    def probs_batch(self, x):
        out = np.zeros((np.asarray(x).shape[0], self.n_classes))
        out[:, self.class_index] = 1.0
        return out


@dataclass(frozen=True)
class ConstantLearner:
    """Always predicts one fixed class with full confidence."""

    class_index: int = 0

    def fit(self, train):
        return _ConstantModel(self.class_index, train.n_classes)


class _LeakModel:
    """Flags whether a query row was part of its training data."""

    def __init__(self, seen, n_classes):
        self.seen = seen
        self.n_classes = n_classes

    def probs_batch(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros((x.shape[0], self.n_classes))
        for i, row in enumerate(x):
            out[i, 0 if row.tobytes() in self.seen else 1] = 1.0
        return out


@dataclass(frozen=True)
class LeakLearner:
    """Adversarial probe: emits the class-0 signature iff the query instance
    was in the training set, so any training-set leakage is visible."""

    def fit(self, train):
        seen = {row.tobytes() for row in np.asarray(train.x, dtype=float)}
        return _LeakModel(seen, train.n_classes)


class _RuleModel:
    def __init__(self, rule, n_classes):
        self.rule = rule
        self.n_classes = n_classes

    def probs_batch(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros((x.shape[0], self.n_classes))
        for i, row in enumerate(x):
            out[i, self.rule(row)] = 1.0
        return out


@dataclass(frozen=True)
class RuleLearner:
    """Ignores the training data and predicts a fixed deterministic rule of the
    instance, so it is perfect under cross-validation when labels follow the rule."""

    def fit(self, train):
        return _RuleModel(lambda row: int(row[0]) % train.n_classes, train.n_classes)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_mixed_dataset(rng, n=60, n_continuous=3, n_nominal=2, n_classes=3, n_values=3):
    values = tuple(chr(ord("a") + i) for i in range(n_values))
    classes = tuple(f"C{i}" for i in range(n_classes))
    schema = make_schema(n_continuous, n_nominal, values, classes)
    x = np.hstack([
        rng.normal(size=(n, n_continuous)),
        rng.integers(0, n_values, size=(n, n_nominal)).astype(float),
    ]) if n_nominal else rng.normal(size=(n, n_continuous))
    x = x.reshape(n, schema.n_attributes)
    y = rng.integers(0, n_classes, size=n)
    # guarantee every class shows up
    for c in range(n_classes):
        y[c] = c
    return Dataset(schema, x, y)
