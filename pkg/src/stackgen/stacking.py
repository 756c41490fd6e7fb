"""Two-level stacking: cross-validated meta-features, a combiner model on top.

Meta-features for each training instance come from base models fitted without
that instance's fold, so the combiner never sees in-training outputs.  The
final base models are refit on all the data.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence, Union

import numpy as np

from .data import Attribute, AttributeKind, Dataset, Instance, Schema, as_row, split, stratified_folds
from .learners import Classifier, Learner, KnnModel, NaiveBayesModel, TreeModel
from .mlr import ColumnInfo, FeatureScope, MlrVariant, WeightMatrix, fit_mlr, mlr_predict_batch, mlr_scores


class Representation(str, Enum):
    """What the base models contribute per instance: hard class labels, or the
    full class-probability vectors."""

    LABELS = "labels"
    PROBS = "probs"


@dataclass(frozen=True, eq=False)
class Level1Dataset:
    """Meta-features of every training instance plus fold provenance.

    ``source_folds[n, k]`` records which fold's held-out pass produced row n's
    features from model k; it must always equal ``fold_ids[n]``.
    """

    features: np.ndarray
    y: np.ndarray
    n_classes: int
    n_models: int
    columns: tuple[ColumnInfo, ...]
    representation: Representation
    instance_ids: np.ndarray
    fold_ids: np.ndarray
    source_folds: np.ndarray

    def __post_init__(self):
        n = self.features.shape[0]
        if self.features.shape != (n, len(self.columns)):
            raise ValueError("feature width does not match column metadata")
        for arr, shape in ((self.y, (n,)), (self.instance_ids, (n,)),
                           (self.fold_ids, (n,)), (self.source_folds, (n, self.n_models))):
            if arr.shape != shape:
                raise ValueError(f"provenance array has shape {arr.shape}, expected {shape}")
        for name in ("features", "y", "instance_ids", "fold_ids", "source_folds"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    def __len__(self) -> int:
        return self.features.shape[0]


def provenance_violations(level1: Level1Dataset) -> list[tuple[int, int]]:
    """(instance, model) pairs whose meta-features came from a model that was
    trained on the instance's own fold.  Empty for a sound pipeline."""
    bad = np.argwhere(level1.source_folds != level1.fold_ids[:, None])
    return [(int(n), int(k)) for n, k in bad]


def build_level1_data(
    train: Dataset,
    learners: Sequence[Learner],
    n_folds: int = 10,
    representation: Representation = Representation.PROBS,
    seed: int = 0,
) -> Level1Dataset:
    """Cross-validate every learner and assemble its held-out outputs, in the
    original instance order.  One shared fold plan serves all learners."""
    if not learners:
        raise ValueError("need at least one learner")
    y = train.require_labels()
    plan = stratified_folds(train, n_folds, seed)
    n = len(train)
    n_models = len(learners)
    n_classes = train.n_classes

    if representation is Representation.PROBS:
        columns = tuple(ColumnInfo(k, c) for k in range(n_models) for c in range(n_classes))
    else:
        columns = tuple(ColumnInfo(k, None) for k in range(n_models))
    features = np.empty((n, len(columns)))
    source_folds = np.full((n, n_models), -1, dtype=np.int64)

    for fold in range(plan.n_folds):
        fit_part, held_out = split(train, plan, fold)
        test_idx = plan.test_indices(fold)
        for k, learner in enumerate(learners):
            try:
                model = learner.fit(fit_part)
            except Exception as exc:
                raise RuntimeError(f"level-0 learner {k} failed on fold {fold}: {exc}") from exc
            probs = model.probs_batch(held_out.x)
            if representation is Representation.PROBS:
                features[test_idx, k * n_classes:(k + 1) * n_classes] = probs
            else:
                features[test_idx, k] = np.argmax(probs, axis=1)
            source_folds[test_idx, k] = fold

    return Level1Dataset(
        features=features,
        y=y.copy(),
        n_classes=n_classes,
        n_models=n_models,
        columns=columns,
        representation=representation,
        instance_ids=np.arange(n, dtype=np.int64),
        fold_ids=plan.assignment.copy(),
        source_folds=source_folds,
    )


def expand_labels_to_indicators(level1: Level1Dataset) -> Level1Dataset:
    """Map each predicted-label column to ``n_classes`` 0/1 indicator columns,
    which is what the linear combiner regresses on."""
    if level1.representation is not Representation.LABELS:
        raise ValueError("only label features expand to indicators")
    n, k = level1.features.shape
    n_classes = level1.n_classes
    expanded = np.zeros((n, k * n_classes))
    for model in range(k):
        codes = level1.features[:, model].astype(np.int64)
        expanded[np.arange(n), model * n_classes + codes] = 1.0
    columns = tuple(ColumnInfo(model, c) for model in range(k) for c in range(n_classes))
    return Level1Dataset(
        features=expanded,
        y=level1.y.copy(),
        n_classes=n_classes,
        n_models=level1.n_models,
        columns=columns,
        representation=level1.representation,
        instance_ids=level1.instance_ids.copy(),
        fold_ids=level1.fold_ids.copy(),
        source_folds=level1.source_folds.copy(),
    )


def level1_schema(representation: Representation, n_models: int, class_values: tuple[str, ...]) -> Schema:
    """Schema of the combiner's training table when the combiner is itself a learner."""
    if representation is Representation.PROBS:
        attrs = tuple(
            Attribute(f"m{k}_p{c}", AttributeKind.continuous())
            for k in range(n_models)
            for c in range(len(class_values))
        )
    else:
        attrs = tuple(Attribute(f"m{k}", AttributeKind.nominal(class_values)) for k in range(n_models))
    return Schema(attrs, class_values)


def _level1_as_dataset(level1: Level1Dataset, class_values: tuple[str, ...]) -> Dataset:
    schema = level1_schema(level1.representation, level1.n_models, class_values)
    return Dataset(schema, level1.features, level1.y)


Level1Spec = Union[MlrVariant, Learner]


@dataclass
class StackedModel:
    """Final base models plus the fitted combiner."""

    schema: Schema
    representation: Representation
    level0: tuple[Classifier, ...]
    level1: WeightMatrix | Classifier

    @property
    def n_classes(self) -> int:
        return self.schema.n_classes

    @property
    def n_models(self) -> int:
        return len(self.level0)

    @property
    def combiner_is_linear(self) -> bool:
        return isinstance(self.level1, WeightMatrix)

    def level1_features_batch(self, x: np.ndarray) -> np.ndarray:
        """Assemble the combiner's input rows from the base models' outputs."""
        x = np.asarray(x, dtype=float)
        n = x.shape[0]
        n_classes = self.n_classes
        if self.representation is Representation.PROBS:
            out = np.empty((n, self.n_models * n_classes))
            for k, model in enumerate(self.level0):
                out[:, k * n_classes:(k + 1) * n_classes] = model.probs_batch(x)
            return out
        labels = np.empty((n, self.n_models))
        for k, model in enumerate(self.level0):
            labels[:, k] = np.argmax(model.probs_batch(x), axis=1)
        if not self.combiner_is_linear:
            return labels
        expanded = np.zeros((n, self.n_models * n_classes))
        for k in range(self.n_models):
            expanded[np.arange(n), k * n_classes + labels[:, k].astype(np.int64)] = 1.0
        return expanded

    def predict_batch(self, x: np.ndarray) -> np.ndarray:
        feats = self.level1_features_batch(x)
        if self.combiner_is_linear:
            return mlr_predict_batch(self.level1, feats)
        return np.argmax(self.level1.probs_batch(feats), axis=1)

    def probs_batch(self, x: np.ndarray) -> np.ndarray:
        """Classifier-protocol adapter: scores as a distribution (linear scores
        are shifted/clipped and normalized, learner combiners pass through)."""
        feats = self.level1_features_batch(x)
        if not self.combiner_is_linear:
            return self.level1.probs_batch(feats)
        scores = np.atleast_2d(mlr_scores(self.level1, feats))
        scores = np.clip(scores, 0.0, None)
        totals = scores.sum(axis=1, keepdims=True)
        uniform = np.full_like(scores, 1.0 / scores.shape[1])
        with np.errstate(invalid="ignore"):
            return np.where(totals > 0, scores / np.where(totals > 0, totals, 1.0), uniform)


def fit_stacked(
    train: Dataset,
    learners: Sequence[Learner],
    level1: Level1Spec = MlrVariant(),
    n_folds: int = 10,
    representation: Representation = Representation.PROBS,
    seed: int = 0,
) -> StackedModel:
    """Cross-validate the base learners, fit the combiner on the held-out
    outputs, then refit every base learner on the full training data."""
    level1_data = build_level1_data(train, learners, n_folds, representation, seed)
    if isinstance(level1, MlrVariant):
        if representation is Representation.LABELS:
            level1_data = expand_labels_to_indicators(level1_data)
        combiner: WeightMatrix | Classifier = fit_mlr(level1_data, level1)
    else:
        combiner = level1.fit(_level1_as_dataset(level1_data, train.schema.class_values))
    final = tuple(learner.fit(train) for learner in learners)
    return StackedModel(train.schema, representation, final, combiner)


def stacked_predict(model: StackedModel, x: Instance) -> tuple[int, np.ndarray]:
    """Predicted class and the meta-feature vector that was fed to the combiner."""
    row = as_row(model.schema, x)[None, :]
    feats = model.level1_features_batch(row)
    return int(model.predict_batch(row)[0]), feats[0]


def stacked_predict_batch(model: StackedModel, x: np.ndarray) -> np.ndarray:
    return model.predict_batch(x)


MODEL_FILE_VERSION = 1

_MODEL_KINDS = {
    "tree": TreeModel,
    "nb": NaiveBayesModel,
    "knn": KnnModel,
    "mlr": WeightMatrix,
}


def _component_from_dict(d: dict):
    kind = d.get("kind")
    if kind not in _MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    return _MODEL_KINDS[kind].from_dict(d)


def model_to_dict(model: StackedModel) -> dict:
    return {
        "version": MODEL_FILE_VERSION,
        "kind": "stacked",
        "schema": model.schema.to_dict(),
        "representation": model.representation.value,
        "level0": [m.to_dict() for m in model.level0],
        "level1": model.level1.to_dict(),
    }


def model_from_dict(d: dict) -> StackedModel:
    if d.get("version") != MODEL_FILE_VERSION:
        raise ValueError(f"unsupported model file version {d.get('version')!r}")
    return StackedModel(
        schema=Schema.from_dict(d["schema"]),
        representation=Representation(d["representation"]),
        level0=tuple(_component_from_dict(m) for m in d["level0"]),
        level1=_component_from_dict(d["level1"]),
    )


def save_model(model: StackedModel, path) -> None:
    """Write the model as a versioned JSON document (floats via repr, so the
    file round-trips bit-exactly)."""
    with open(path, "w") as f:
        json.dump(model_to_dict(model), f, indent=2, sort_keys=True)
        f.write("\n")


def load_model(path) -> StackedModel:
    with open(path) as f:
        return model_from_dict(json.load(f))
