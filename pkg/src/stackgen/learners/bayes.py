"""Naive Bayes with add-one smoothing on nominal attributes and per-class
Gaussians on continuous ones.  The joint is evaluated in log space."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..data import Dataset, Instance, Schema, as_row

VARIANCE_FLOOR = 1e-6


@dataclass
class NaiveBayesModel:
    schema: Schema
    log_priors: np.ndarray
    nominal_log_cond: dict[int, np.ndarray] = field(repr=False)  # attr -> (V, I) log P(v | c)
    gauss_mean: np.ndarray = field(repr=False)  # (I, n_continuous)
    gauss_var: np.ndarray = field(repr=False)

    @property
    def n_classes(self) -> int:
        return self.schema.n_classes

    def probs_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = x.shape[0]
        log_joint = np.tile(self.log_priors, (n, 1))
        for a, table in self.nominal_log_cond.items():
            codes = x[:, a].astype(np.int64)
            log_joint += table[codes]
        cont = self.schema.continuous_indices
        if cont.size:
            xc = x[:, cont]
            for c in range(self.n_classes):
                mean = self.gauss_mean[c]
                var = self.gauss_var[c]
                ll = -0.5 * (np.log(2.0 * math.pi * var) + (xc - mean) ** 2 / var)
                log_joint[:, c] += ll.sum(axis=1)
        log_joint -= log_joint.max(axis=1, keepdims=True)
        joint = np.exp(log_joint)
        return joint / joint.sum(axis=1, keepdims=True)

    def to_dict(self) -> dict:
        return {
            "kind": "nb",
            "schema": self.schema.to_dict(),
            "log_priors": self.log_priors.tolist(),
            "nominal_log_cond": {str(a): t.tolist() for a, t in self.nominal_log_cond.items()},
            "gauss_mean": self.gauss_mean.tolist(),
            "gauss_var": self.gauss_var.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> NaiveBayesModel:
        return cls(
            schema=Schema.from_dict(d["schema"]),
            log_priors=np.array(d["log_priors"], dtype=float),
            nominal_log_cond={int(a): np.array(t, dtype=float) for a, t in d["nominal_log_cond"].items()},
            gauss_mean=np.array(d["gauss_mean"], dtype=float),
            gauss_var=np.array(d["gauss_var"], dtype=float),
        )


def train_nb(train: Dataset) -> NaiveBayesModel:
    y = train.require_labels()
    if len(train) == 0:
        raise ValueError("cannot train naive Bayes on an empty dataset")
    schema = train.schema
    n_classes = schema.n_classes
    counts = np.bincount(y, minlength=n_classes)
    if np.any(counts == 0):
        missing = schema.class_values[int(np.argmin(counts))]
        raise ValueError(f"class {missing!r} has no training instances")
    log_priors = np.log(counts / len(train))

    nominal_log_cond = {}
    for a in schema.nominal_indices:
        a = int(a)
        n_values = schema.value_count(a)
        codes = train.x[:, a].astype(np.int64)
        table = np.bincount(codes * n_classes + y, minlength=n_values * n_classes)
        table = table.reshape(n_values, n_classes).astype(float)
        cond = (table + 1.0) / (counts + float(n_values))
        nominal_log_cond[a] = np.log(cond)

    cont = schema.continuous_indices
    gauss_mean = np.zeros((n_classes, cont.size))
    gauss_var = np.ones((n_classes, cont.size))
    if cont.size:
        xc = train.x[:, cont]
        for c in range(n_classes):
            rows = xc[y == c]
            gauss_mean[c] = rows.mean(axis=0)
            gauss_var[c] = np.maximum(rows.var(axis=0), VARIANCE_FLOOR)

    return NaiveBayesModel(schema, log_priors, nominal_log_cond, gauss_mean, gauss_var)


def nb_class_probs(model: NaiveBayesModel, x: Instance) -> np.ndarray:
    return model.probs_batch(as_row(model.schema, x)[None, :])[0]


@dataclass(frozen=True)
class NaiveBayesLearner:
    def fit(self, train: Dataset) -> NaiveBayesModel:
        return train_nb(train)
