"""Shared classifier interfaces and probability-vector helpers."""
from __future__ import annotations

from typing import Protocol, runtime_checkable

import numpy as np

from ..data import Dataset

PROB_SUM_ATOL = 1e-9


def predict_class(probs) -> int:
    """Index of the largest probability; ties break to the lowest class index."""
    probs = np.asarray(probs)
    if probs.ndim != 1 or probs.size == 0:
        raise ValueError("expected a non-empty probability vector")
    return int(np.argmax(probs))


def check_prob_vector(probs, n_classes: int | None = None) -> np.ndarray:
    """Validate non-negativity and unit sum; returns the vector as an array."""
    p = np.asarray(probs, dtype=float)
    if n_classes is not None and p.shape != (n_classes,):
        raise ValueError(f"expected {n_classes} probabilities, got shape {p.shape}")
    if np.any(p < 0):
        raise ValueError(f"negative probability in {p}")
    if abs(p.sum() - 1.0) > PROB_SUM_ATOL:
        raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
    return p


@runtime_checkable
class Classifier(Protocol):
    """A fitted model that scores batches of rows with class probabilities."""

    @property
    def n_classes(self) -> int: ...

    def probs_batch(self, x: np.ndarray) -> np.ndarray: ...


@runtime_checkable
class Learner(Protocol):
    """A learning algorithm: fits a Dataset and returns a Classifier."""

    def fit(self, train: Dataset) -> Classifier: ...


def classes_batch(model: Classifier, x: np.ndarray) -> np.ndarray:
    """Predicted class per row (argmax of the model's probabilities)."""
    return np.argmax(model.probs_batch(x), axis=1)
