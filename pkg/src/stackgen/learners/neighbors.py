"""Distance-weighted k-nearest-neighbor classification on mixed attributes.

Continuous attributes are min-max scaled to [0, 1] (queries clamped) and
compared by absolute difference; nominal attributes use the value-difference
metric, i.e. the L1 distance between the class-conditional distributions of
the two values, scaled so one attribute contributes at most 1.  The total
distance is the Euclidean norm of the per-attribute differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import Dataset, Instance, Schema, as_row

_CHUNK = 2048


@dataclass
class KnnModel:
    schema: Schema
    p: int
    normalize: bool
    x_train: np.ndarray = field(repr=False)
    y_train: np.ndarray = field(repr=False)
    cont_min: np.ndarray = field(repr=False)
    cont_range: np.ndarray = field(repr=False)
    cond_tables: dict[int, np.ndarray] = field(repr=False)  # attr -> (V, I) P(class | value)
    dist_tables: dict[int, np.ndarray] = field(repr=False)  # attr -> (V, V) value-difference

    @property
    def n_classes(self) -> int:
        return self.schema.n_classes

    def _scaled_cont(self, x: np.ndarray, is_query: bool) -> np.ndarray:
        cols = self.schema.continuous_indices
        xc = x[:, cols]
        if not self.normalize:
            return xc
        with np.errstate(invalid="ignore"):
            scaled = np.where(self.cont_range > 0, (xc - self.cont_min) / np.where(self.cont_range > 0, self.cont_range, 1.0), 0.0)
        if is_query:
            scaled = np.clip(scaled, 0.0, 1.0)
        return scaled

    def distances_batch(self, x: np.ndarray) -> np.ndarray:
        """Pairwise distances (n_queries, n_train) under the mixed metric."""
        x = np.asarray(x, dtype=float)
        n = x.shape[0]
        train_cont = self._scaled_cont(self.x_train, is_query=False)
        query_cont = self._scaled_cont(x, is_query=True)
        d2 = np.zeros((n, self.x_train.shape[0]))
        # per-attribute accumulation: no (n, n_train, A) intermediate, and a
        # query equal to a training row yields an exact zero distance
        for a in range(train_cont.shape[1]):
            diff = query_cont[:, a, None] - train_cont[None, :, a]
            d2 += diff * diff
        for a in self.schema.nominal_indices:
            a = int(a)
            half = self.dist_tables[a] / 2.0
            table = half * half
            q_codes = x[:, a].astype(np.int64)
            t_codes = self.x_train[:, a].astype(np.int64)
            d2 += table[q_codes][:, t_codes]
        return np.sqrt(np.maximum(d2, 0.0))

    def probs_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.empty((x.shape[0], self.n_classes))
        for start in range(0, x.shape[0], _CHUNK):
            out[start:start + _CHUNK] = self._probs_chunk(x[start:start + _CHUNK])
        return out

    def _probs_chunk(self, x: np.ndarray) -> np.ndarray:
        n_train = self.x_train.shape[0]
        k = min(self.p, n_train)
        d = self.distances_batch(x)
        probs = np.zeros((x.shape[0], self.n_classes))
        order = np.argsort(d, axis=1, kind="stable")[:, :k]
        d_near = np.take_along_axis(d, order, axis=1)
        y_near = self.y_train[order]
        rows = np.arange(x.shape[0])
        zero_rows = np.flatnonzero(d.min(axis=1) == 0.0)
        for r in zero_rows:
            # limit of the inverse-distance vote: coincident training points win
            hits = self.y_train[d[r] == 0.0]
            probs[r] = np.bincount(hits, minlength=self.n_classes) / hits.size
        regular = np.setdiff1d(rows, zero_rows, assume_unique=True)
        if regular.size:
            w = 1.0 / d_near[regular]
            np.add.at(probs, (np.repeat(regular, k), y_near[regular].ravel()), w.ravel())
            probs[regular] /= w.sum(axis=1, keepdims=True)
        return probs

    def to_dict(self) -> dict:
        return {
            "kind": "knn",
            "schema": self.schema.to_dict(),
            "p": self.p,
            "normalize": self.normalize,
            "x_train": self.x_train.tolist(),
            "y_train": self.y_train.tolist(),
            "cont_min": self.cont_min.tolist(),
            "cont_range": self.cont_range.tolist(),
            "cond_tables": {str(a): t.tolist() for a, t in self.cond_tables.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> KnnModel:
        schema = Schema.from_dict(d["schema"])
        cond = {int(a): np.array(t, dtype=float) for a, t in d["cond_tables"].items()}
        x_train = np.array(d["x_train"], dtype=float).reshape(len(d["y_train"]), schema.n_attributes)
        return cls(
            schema=schema,
            p=int(d["p"]),
            normalize=bool(d["normalize"]),
            x_train=x_train,
            y_train=np.array(d["y_train"], dtype=np.int64),
            cont_min=np.array(d["cont_min"], dtype=float),
            cont_range=np.array(d["cont_range"], dtype=float),
            cond_tables=cond,
            dist_tables={a: _value_difference_table(t) for a, t in cond.items()},
        )


def _value_difference_table(cond: np.ndarray) -> np.ndarray:
    return np.abs(cond[:, None, :] - cond[None, :, :]).sum(axis=2)


def train_knn(train: Dataset, p: int = 3, normalize: bool = True) -> KnnModel:
    """Store the training data, fit scaling ranges and value-difference tables."""
    if p < 1:
        raise ValueError("p must be at least 1")
    y = train.require_labels()
    if len(train) == 0:
        raise ValueError("cannot fit nearest neighbors on an empty dataset")
    schema = train.schema
    cont = schema.continuous_indices
    if cont.size:
        xc = train.x[:, cont]
        cont_min = xc.min(axis=0)
        cont_range = xc.max(axis=0) - cont_min
    else:
        cont_min = np.zeros(0)
        cont_range = np.zeros(0)

    n_classes = schema.n_classes
    cond_tables = {}
    dist_tables = {}
    for a in schema.nominal_indices:
        a = int(a)
        n_values = schema.value_count(a)
        codes = train.x[:, a].astype(np.int64)
        table = np.bincount(codes * n_classes + y, minlength=n_values * n_classes)
        table = table.reshape(n_values, n_classes).astype(float)
        totals = table.sum(axis=1, keepdims=True)
        cond = np.where(totals > 0, table / np.where(totals > 0, totals, 1.0), 1.0 / n_classes)
        cond_tables[a] = cond
        dist_tables[a] = _value_difference_table(cond)

    return KnnModel(schema, p, normalize, train.x, y, cont_min, cont_range, cond_tables, dist_tables)


def mvdm_distance(model: KnnModel, attr: int, v1: int, v2: int) -> float:
    """Value-difference between two nominal values: sum over classes of
    |P(c | v1) - P(c | v2)|."""
    if attr not in model.dist_tables:
        raise ValueError(f"attribute {model.schema.attributes[attr].name} is continuous")
    table = model.dist_tables[attr]
    n_values = table.shape[0]
    if not (0 <= v1 < n_values and 0 <= v2 < n_values):
        raise ValueError(f"value index out of range for attribute {attr}")
    return float(table[v1, v2])


def knn_class_probs(model: KnnModel, x: Instance) -> np.ndarray:
    return model.probs_batch(as_row(model.schema, x)[None, :])[0]


@dataclass(frozen=True)
class KnnLearner:
    p: int = 3
    normalize: bool = True

    def fit(self, train: Dataset) -> KnnModel:
        return train_knn(train, self.p, self.normalize)
