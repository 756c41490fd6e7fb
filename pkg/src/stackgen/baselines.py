"""Reference combination methods: cross-validated model selection, majority
vote, probability averaging, and bootstrap bagging."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Dataset, Instance, as_row, split, stratified_folds
from .learners import Classifier, Learner, predict_class


@dataclass
class SelectionResult:
    """Outcome of picking the best learner by internal cross-validation."""

    chosen: int
    cv_errors: tuple[float, ...]
    model: Classifier

    def __post_init__(self):
        if self.cv_errors[self.chosen] != min(self.cv_errors):
            raise ValueError("chosen learner does not attain the minimum CV error")


def best_cv(train: Dataset, learners: Sequence[Learner], n_folds: int = 10, seed: int = 0) -> SelectionResult:
    """Estimate each learner's cross-validation error, pick the minimizer
    (ties to the lowest index), and refit it on all the data."""
    if not learners:
        raise ValueError("need at least one learner")
    plan = stratified_folds(train, n_folds, seed)
    wrong = np.zeros(len(learners))
    for fold in range(plan.n_folds):
        fit_part, held_out = split(train, plan, fold)
        truth = held_out.require_labels()
        for k, learner in enumerate(learners):
            model = learner.fit(fit_part)
            predicted = np.argmax(model.probs_batch(held_out.x), axis=1)
            wrong[k] += int((predicted != truth).sum())
    errors = wrong / len(train)
    chosen = int(np.argmin(errors))
    return SelectionResult(chosen, tuple(float(e) for e in errors), learners[chosen].fit(train))


def majority_vote(predictions: Sequence[int], confidences: Sequence[np.ndarray] | None = None) -> int:
    """Plurality class.  Ties break by the largest summed probability over the
    tied classes when confidences are given, otherwise by lowest class index."""
    predictions = [int(p) for p in predictions]
    if not predictions:
        raise ValueError("need at least one prediction")
    counts = np.bincount(predictions)
    top = counts.max()
    tied = np.flatnonzero(counts == top)
    if tied.size == 1 or confidences is None:
        return int(tied[0])
    summed = np.zeros(tied.size)
    for conf in confidences:
        conf = np.asarray(conf, dtype=float)
        summed += conf[tied]
    return int(tied[int(np.argmax(summed))])


def average_probs(probs: Sequence[np.ndarray]) -> tuple[np.ndarray, int]:
    """Arithmetic mean of the models' probability vectors, and its argmax."""
    if not len(probs):
        raise ValueError("need at least one probability vector")
    stacked = np.asarray([np.asarray(p, dtype=float) for p in probs])
    if stacked.ndim != 2:
        raise ValueError("probability vectors have mismatched lengths")
    mean = stacked.mean(axis=0)
    return mean, predict_class(mean)


@dataclass
class BaggedEnsemble:
    """Models trained on with-replacement resamples, combined by majority vote."""

    members: tuple[Classifier, ...]
    seed: int
    in_bag: np.ndarray = field(repr=False)  # (h, n) resample indices per member

    @property
    def h(self) -> int:
        return len(self.members)

    @property
    def n_classes(self) -> int:
        return self.members[0].n_classes


def fit_bagging(train: Dataset, base: Learner, h: int = 50, seed: int = 0) -> BaggedEnsemble:
    """Train ``h`` copies of the base learner, each on an n-draw bootstrap resample."""
    if h < 1:
        raise ValueError("h must be at least 1")
    n = len(train)
    rng = np.random.default_rng(seed)
    in_bag = rng.integers(0, n, size=(h, n))
    members = tuple(base.fit(train.subset(row)) for row in in_bag)
    return BaggedEnsemble(members, seed, in_bag)


def oob_fractions(ensemble: BaggedEnsemble) -> np.ndarray:
    """Per-member fraction of training instances absent from its resample."""
    n = ensemble.in_bag.shape[1]
    return np.array([1.0 - np.unique(row).size / n for row in ensemble.in_bag])


def bagged_predict_batch(ensemble: BaggedEnsemble, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    all_probs = np.stack([m.probs_batch(x) for m in ensemble.members])  # (h, n, I)
    votes = np.argmax(all_probs, axis=2)  # (h, n)
    out = np.empty(x.shape[0], dtype=np.int64)
    for i in range(x.shape[0]):
        out[i] = majority_vote(votes[:, i], all_probs[:, i, :])
    return out


def bagged_predict(ensemble: BaggedEnsemble, x: Instance) -> int:
    schema = getattr(ensemble.members[0], "schema", None)
    row = as_row(schema, x)[None, :] if schema is not None else np.asarray([x.values], dtype=float)
    return int(bagged_predict_batch(ensemble, row)[0])
