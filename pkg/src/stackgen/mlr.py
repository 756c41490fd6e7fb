"""Least-squares solvers and the multi-response linear regression combiner.

A classification problem with I classes becomes I separate regressions on 0/1
responses; prediction takes the class whose regression scores highest.  The
default configuration fits one non-negative coefficient per base model and
class, using a Lawson-Hanson active-set solver.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

if TYPE_CHECKING:
    from .stacking import Level1Dataset

RIDGE = 1e-10
NNLS_TOL = 1e-10


class MlrKind(str, Enum):
    """Solver flavor: (i) intercept + unconstrained, (ii) unconstrained,
    (iii) non-negative coefficients (no intercept)."""

    INTERCEPT = "i"
    PLAIN = "ii"
    NONNEGATIVE = "iii"


class FeatureScope(str, Enum):
    """PER_CLASS regresses class c on the c-th probability of each model
    (one weight per model); FULL uses every probability column."""

    PER_CLASS = "per-class"
    FULL = "full"


@dataclass(frozen=True)
class MlrVariant:
    kind: MlrKind = MlrKind.NONNEGATIVE
    scope: FeatureScope = FeatureScope.PER_CLASS


class ColumnInfo(NamedTuple):
    """Provenance of one level-1 feature column."""

    model: int
    class_index: int | None


def one_hot_responses(labels, n_classes: int) -> np.ndarray:
    """0/1 response matrix: row n, column c is 1 iff label n equals c."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError("label out of range")
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def _check_finite(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.shape != (a.shape[0],):
        raise ValueError(f"incompatible shapes {a.shape} and {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("non-finite inputs")
    return a, b


def solve_ols(a, b, intercept: bool = False, ridge: float = RIDGE) -> np.ndarray:
    """Least squares via the normal equations with a tiny ridge term, so the
    solution stays unique on collinear designs (the intercept is unpenalized).
    With ``intercept`` the returned vector starts with the intercept."""
    a, b = _check_finite(a, b)
    if intercept:
        a = np.hstack([np.ones((a.shape[0], 1)), a])
    gram = a.T @ a
    penalty = np.eye(a.shape[1]) * ridge
    if intercept:
        penalty[0, 0] = 0.0
    return np.linalg.solve(gram + penalty, a.T @ b)


def solve_nnls(a, b, tol: float = NNLS_TOL, max_iter: int | None = None) -> np.ndarray:
    """Least squares under elementwise non-negativity (active-set method).

    Starts from the zero vector, repeatedly frees the coordinate with the most
    positive gradient, and backtracks whenever the unconstrained solution on
    the free set leaves the feasible region.  Terminates when the gradient on
    the zero set is non-positive (up to ``tol`` relative to the problem scale).
    """
    a, b = _check_finite(a, b)
    n_features = a.shape[1]
    if max_iter is None:
        max_iter = max(3 * n_features, 1)
    x = np.zeros(n_features)
    passive = np.zeros(n_features, dtype=bool)
    scale = max(1.0, float(np.abs(a.T @ b).max(initial=0.0)))
    for _ in range(max_iter):
        grad = a.T @ (b - a @ x)
        if passive.all() or grad[~passive].max(initial=-np.inf) <= tol * scale:
            return x
        free = np.flatnonzero(~passive)
        passive[free[int(np.argmax(grad[free]))]] = True
        while True:
            trial = np.zeros(n_features)
            trial[passive], *_ = np.linalg.lstsq(a[:, passive], b, rcond=None)
            if trial[passive].min() > 0.0:
                x = trial
                break
            shrink = passive & (trial <= 0.0)
            num = x[shrink]
            den = x[shrink] - trial[shrink]
            with np.errstate(invalid="ignore", divide="ignore"):
                ratios = np.where(den > 0, num / den, 0.0)
            alpha = float(ratios.min())
            x = x + alpha * (trial - x)
            x[x < 0.0] = 0.0
            passive &= x > 0.0
            if not passive.any():
                break
    raise RuntimeError("non-negative least squares hit its iteration cap")


@dataclass
class WeightMatrix:
    """Per-class combination weights of the linear level-1 model.

    ``coef`` has one row per class: width ``n_models`` for PER_CLASS scope,
    ``n_models * n_classes`` for FULL.  ``dense`` is the equivalent
    full-feature-width weight matrix used at prediction time.
    """

    variant: MlrVariant
    columns: tuple[ColumnInfo, ...]
    n_classes: int
    n_models: int
    coef: np.ndarray = field(repr=False)
    intercepts: np.ndarray | None = field(repr=False, default=None)
    dense: np.ndarray = field(repr=False, default=None)

    @property
    def n_features(self) -> int:
        return len(self.columns)

    def to_dict(self) -> dict:
        return {
            "kind": "mlr",
            "variant": {"kind": self.variant.kind.value, "scope": self.variant.scope.value},
            "columns": [[c.model, c.class_index] for c in self.columns],
            "n_classes": self.n_classes,
            "n_models": self.n_models,
            "coef": self.coef.tolist(),
            "intercepts": None if self.intercepts is None else self.intercepts.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> WeightMatrix:
        variant = MlrVariant(MlrKind(d["variant"]["kind"]), FeatureScope(d["variant"]["scope"]))
        columns = tuple(ColumnInfo(int(m), None if c is None else int(c)) for m, c in d["columns"])
        coef = np.array(d["coef"], dtype=float)
        intercepts = None if d["intercepts"] is None else np.array(d["intercepts"], dtype=float)
        w = cls(variant, columns, int(d["n_classes"]), int(d["n_models"]), coef, intercepts)
        w.dense = _dense_weights(w)
        return w


def _per_class_positions(columns: tuple[ColumnInfo, ...], n_models: int, n_classes: int) -> np.ndarray:
    lookup = {}
    for pos, col in enumerate(columns):
        lookup[(col.model, col.class_index)] = pos
    positions = np.empty((n_classes, n_models), dtype=np.intp)
    for c in range(n_classes):
        for k in range(n_models):
            if (k, c) not in lookup:
                raise ValueError(
                    "per-class regression needs one probability column per (model, class) pair; "
                    "label features must be expanded to indicators first"
                )
            positions[c, k] = lookup[(k, c)]
    return positions


def _dense_weights(w: WeightMatrix) -> np.ndarray:
    dense = np.zeros((len(w.columns), w.n_classes))
    if w.variant.scope is FeatureScope.FULL:
        dense[:, :] = w.coef.T
    else:
        positions = _per_class_positions(w.columns, w.n_models, w.n_classes)
        for c in range(w.n_classes):
            dense[positions[c], c] = w.coef[c]
    return dense


def fit_mlr(level1: "Level1Dataset", variant: MlrVariant = MlrVariant()) -> WeightMatrix:
    """Fit one regression per class on the level-1 features (pooled across folds)."""
    features = level1.features
    n_classes = level1.n_classes
    n_models = level1.n_models
    columns = level1.columns
    responses = one_hot_responses(level1.y, n_classes)

    if variant.scope is FeatureScope.PER_CLASS:
        positions = _per_class_positions(columns, n_models, n_classes)
        width = n_models
    else:
        if any(col.class_index is None for col in columns):
            raise ValueError("full-scope regression needs probability-style columns; "
                             "label features must be expanded to indicators first")
        positions = None
        width = len(columns)

    coef = np.zeros((n_classes, width))
    intercepts = np.zeros(n_classes) if variant.kind is MlrKind.INTERCEPT else None
    for c in range(n_classes):
        design = features if positions is None else features[:, positions[c]]
        target = responses[:, c]
        if variant.kind is MlrKind.NONNEGATIVE:
            coef[c] = solve_nnls(design, target)
        elif variant.kind is MlrKind.INTERCEPT:
            solution = solve_ols(design, target, intercept=True)
            intercepts[c] = solution[0]
            coef[c] = solution[1:]
        else:
            coef[c] = solve_ols(design, target)

    w = WeightMatrix(variant, tuple(columns), n_classes, n_models, coef, intercepts)
    w.dense = _dense_weights(w)
    return w


def mlr_scores(weights: WeightMatrix, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=float)
    squeeze = features.ndim == 1
    if squeeze:
        features = features[None, :]
    if features.shape[1] != weights.n_features:
        raise ValueError(f"expected {weights.n_features} features, got {features.shape[1]}")
    scores = features @ weights.dense
    if weights.intercepts is not None:
        scores = scores + weights.intercepts
    return scores[0] if squeeze else scores


def mlr_predict(weights: WeightMatrix, features) -> int:
    """Class whose regression scores highest; ties break to the lowest index."""
    return int(np.argmax(mlr_scores(weights, np.asarray(features, dtype=float))))


def mlr_predict_batch(weights: WeightMatrix, features: np.ndarray) -> np.ndarray:
    return np.argmax(mlr_scores(weights, features), axis=1)
