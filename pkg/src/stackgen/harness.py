"""Experiment harness: method specifications, outer cross-validation and
repeated synthetic trials, the #SE spread diagnostic, and report emission.

Every stochastic task draws its seed from the master seed through a labeled
hash, so serial and parallel runs produce identical results.
"""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from . import __version__ as _tool_version
from .baselines import BaggedEnsemble, bagged_predict_batch, best_cv, fit_bagging, majority_vote
from .data import Dataset
from .learners import (
    DEFAULT_LEVEL1_KNN_P,
    Classifier,
    KnnLearner,
    Learner,
    NaiveBayesLearner,
    TreeLearner,
    default_level0,
)
from .mlr import FeatureScope, MlrKind, MlrVariant, WeightMatrix
from .stacking import Representation, StackedModel, fit_stacked
from .synth import Led24Params, WaveformParams, gen_led24, gen_waveform

REPORT_VERSION = 1


def derive_seed(master: int, *parts) -> int:
    """Deterministic, platform-independent child seed for a labeled subtask."""
    digest = hashlib.sha256()
    digest.update(str(int(master)).encode())
    for part in parts:
        digest.update(b"|")
        digest.update(str(part).encode())
    return int.from_bytes(digest.digest()[:8], "big") >> 1


# ---------------------------------------------------------------------------
# Method specifications


class FittedMethod(Protocol):
    def predict_batch(self, x: np.ndarray) -> np.ndarray: ...


class _ClassifierAdapter:
    def __init__(self, model: Classifier):
        self.model = model

    def predict_batch(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.model.probs_batch(x), axis=1)


class _VoteAdapter:
    def __init__(self, models: Sequence[Classifier]):
        self.models = tuple(models)

    def predict_batch(self, x: np.ndarray) -> np.ndarray:
        probs = np.stack([m.probs_batch(x) for m in self.models])
        votes = np.argmax(probs, axis=2)
        return np.array([majority_vote(votes[:, i], probs[:, i, :]) for i in range(x.shape[0])])


class _AverageAdapter:
    def __init__(self, models: Sequence[Classifier]):
        self.models = tuple(models)

    def predict_batch(self, x: np.ndarray) -> np.ndarray:
        probs = np.stack([m.probs_batch(x) for m in self.models])
        return np.argmax(probs.mean(axis=0), axis=1)


class _BaggedAdapter:
    def __init__(self, ensemble: BaggedEnsemble):
        self.ensemble = ensemble

    def predict_batch(self, x: np.ndarray) -> np.ndarray:
        return bagged_predict_batch(self.ensemble, x)


@dataclass(frozen=True)
class Level0Method:
    """A single base learner evaluated on its own."""

    learner_kind: str  # tree | nb | knn
    p: int = 3

    def canonical(self) -> str:
        return f"knn:p={self.p}" if self.learner_kind == "knn" else self.learner_kind

    def make_learner(self) -> Learner:
        if self.learner_kind == "tree":
            return TreeLearner()
        if self.learner_kind == "nb":
            return NaiveBayesLearner()
        if self.learner_kind == "knn":
            return KnnLearner(p=self.p)
        raise ValueError(f"unknown learner kind {self.learner_kind!r}")

    def fit(self, train: Dataset, n_folds: int, seed: int) -> FittedMethod:
        return _ClassifierAdapter(self.make_learner().fit(train))


@dataclass(frozen=True)
class BestCvMethod:
    def canonical(self) -> str:
        return "bestcv"

    def fit(self, train: Dataset, n_folds: int, seed: int) -> FittedMethod:
        return _ClassifierAdapter(best_cv(train, default_level0(), n_folds, seed).model)


@dataclass(frozen=True)
class VoteMethod:
    def canonical(self) -> str:
        return "vote"

    def fit(self, train: Dataset, n_folds: int, seed: int) -> FittedMethod:
        return _VoteAdapter([lr.fit(train) for lr in default_level0()])


@dataclass(frozen=True)
class AverageProbsMethod:
    def canonical(self) -> str:
        return "avg"

    def fit(self, train: Dataset, n_folds: int, seed: int) -> FittedMethod:
        return _AverageAdapter([lr.fit(train) for lr in default_level0()])


@dataclass(frozen=True)
class BaggingMethod:
    h: int = 50
    base: Level0Method = Level0Method("tree")

    def canonical(self) -> str:
        return f"bag:h={self.h},base={self.base.canonical()}"

    def fit(self, train: Dataset, n_folds: int, seed: int) -> FittedMethod:
        return _BaggedAdapter(fit_bagging(train, self.base.make_learner(), self.h, seed))


@dataclass(frozen=True)
class StackedMethod:
    representation: Representation = Representation.PROBS
    level1: str = "mlr"  # mlr | tree | nb | knn
    mlr_kind: MlrKind = MlrKind.NONNEGATIVE
    mlr_scope: FeatureScope = FeatureScope.PER_CLASS

    def canonical(self) -> str:
        if self.level1 == "mlr":
            token = "full" if self.mlr_scope is FeatureScope.FULL else self.mlr_kind.value
            l1 = f"mlr({token})"
        else:
            l1 = self.level1
        return f"stack:repr={self.representation.value},l1={l1}"

    def level1_spec(self):
        if self.level1 == "mlr":
            return MlrVariant(self.mlr_kind, self.mlr_scope)
        if self.level1 == "tree":
            return TreeLearner()
        if self.level1 == "nb":
            return NaiveBayesLearner()
        if self.level1 == "knn":
            return KnnLearner(p=DEFAULT_LEVEL1_KNN_P, normalize=False)
        raise ValueError(f"unknown level-1 generalizer {self.level1!r}")

    def fit(self, train: Dataset, n_folds: int, seed: int) -> StackedModel:
        return fit_stacked(train, default_level0(), self.level1_spec(), n_folds, self.representation, seed)


MethodSpec = Level0Method | BestCvMethod | VoteMethod | AverageProbsMethod | BaggingMethod | StackedMethod


def _parse_kv(parts: Sequence[str], allowed: Sequence[str], context: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for part in parts:
        if "=" not in part:
            raise ValueError(f"malformed option {part!r} in {context!r}")
        key, value = part.split("=", 1)
        if key not in allowed:
            raise ValueError(f"unknown option {key!r} in {context!r}")
        if key in out:
            raise ValueError(f"duplicate option {key!r} in {context!r}")
        out[key] = value
    return out


def parse_method(text: str) -> MethodSpec:
    """Parse the method grammar:
    ``tree | nb | knn:p=INT | bestcv | vote | avg | bag:h=INT,base=SPEC |
    stack:repr=probs|labels,l1=mlr(i|ii|iii|full)|tree|nb|knn``."""
    text = text.strip()
    head, _, rest = text.partition(":")
    if head == "tree" or head == "nb":
        if rest:
            raise ValueError(f"{head!r} takes no options")
        return Level0Method(head)
    if head == "bestcv" or head == "vote" or head == "avg":
        if rest:
            raise ValueError(f"{head!r} takes no options")
        return {"bestcv": BestCvMethod, "vote": VoteMethod, "avg": AverageProbsMethod}[head]()
    if head == "knn":
        opts = _parse_kv(rest.split(",") if rest else [], ["p"], text)
        return Level0Method("knn", p=int(opts.get("p", 3)))
    if head == "bag":
        if not rest:
            return BaggingMethod()
        base_text = None
        if ",base=" in rest:
            rest, _, base_text = rest.partition(",base=")
        elif rest.startswith("base="):
            base_text, rest = rest[len("base="):], ""
        opts = _parse_kv(rest.split(",") if rest else [], ["h"], text)
        base = parse_method(base_text) if base_text else Level0Method("tree")
        if not isinstance(base, Level0Method):
            raise ValueError(f"bagging base must be a single learner, got {base_text!r}")
        return BaggingMethod(h=int(opts.get("h", 50)), base=base)
    if head == "stack":
        opts = _parse_kv(rest.split(",") if rest else [], ["repr", "l1"], text)
        representation = Representation(opts.get("repr", "probs"))
        l1 = opts.get("l1", "mlr(iii)")
        if l1.startswith("mlr(") and l1.endswith(")"):
            token = l1[len("mlr("):-1]
            if token == "full":
                return StackedMethod(representation, "mlr", MlrKind.NONNEGATIVE, FeatureScope.FULL)
            return StackedMethod(representation, "mlr", MlrKind(token), FeatureScope.PER_CLASS)
        if l1 in ("tree", "nb", "knn"):
            return StackedMethod(representation, l1)
        raise ValueError(f"unknown level-1 generalizer {l1!r}")
    raise ValueError(f"unknown method {text!r}")


def split_method_list(text: str) -> list[str]:
    """Split a comma-separated list of method specs, re-joining fragments that
    are options of the previous spec (they look like ``key=value``)."""
    out: list[str] = []
    for fragment in text.split(","):
        fragment = fragment.strip()
        if out and "=" in fragment.partition(":")[0]:
            out[-1] += "," + fragment
        else:
            out.append(fragment)
    return [f for f in out if f]


# ---------------------------------------------------------------------------
# Synthetic generator specifications


@dataclass(frozen=True)
class GenSpec:
    name: str  # led24 | waveform
    noise: float = 0.1
    variant: int = 40

    def canonical(self) -> str:
        if self.name == "led24":
            return f"led24:noise={self.noise!r}"
        return f"waveform:variant={self.variant}"

    def generate(self, n: int, seed: int) -> Dataset:
        if self.name == "led24":
            return gen_led24(Led24Params(n=n, noise=self.noise, seed=seed))
        return gen_waveform(WaveformParams(n=n, variant=self.variant, seed=seed))


def parse_gen_spec(text: str) -> GenSpec:
    head, _, rest = text.strip().partition(":")
    if head == "led24":
        opts = _parse_kv(rest.split(",") if rest else [], ["noise"], text)
        return GenSpec("led24", noise=float(opts.get("noise", 0.1)))
    if head == "waveform":
        opts = _parse_kv(rest.split(",") if rest else [], ["variant"], text)
        return GenSpec("waveform", variant=int(opts.get("variant", 40)))
    raise ValueError(f"unknown generator {text!r}")


# ---------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True)
class EvalResult:
    """Mean error rate (percent) with its standard error over folds or trials."""

    method: str
    mean_error: float
    std_error: float
    fold_errors: tuple[float, ...]
    n_folds: int
    seed: int

    def __post_init__(self):
        if len(self.fold_errors) != self.n_folds:
            raise ValueError("per-fold error list length must equal the fold count")
        if not all(0.0 <= e <= 100.0 for e in self.fold_errors):
            raise ValueError("error rates are percentages in [0, 100]")
        if self.std_error < 0.0:
            raise ValueError("standard error cannot be negative")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "mean_error": self.mean_error,
            "std_error": self.std_error,
            "fold_errors": list(self.fold_errors),
            "n_folds": self.n_folds,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> EvalResult:
        return cls(
            method=d["method"],
            mean_error=float(d["mean_error"]),
            std_error=float(d["std_error"]),
            fold_errors=tuple(float(e) for e in d["fold_errors"]),
            n_folds=int(d["n_folds"]),
            seed=int(d["seed"]),
        )


def _aggregate(method: str, errors: list[float], seed: int) -> EvalResult:
    arr = np.asarray(errors)
    mean = float(arr.mean())
    se = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
    return EvalResult(method, mean, se, tuple(float(e) for e in errors), arr.size, seed)


def _run_tasks(tasks: Sequence[Callable[[], float]], jobs: int) -> list[float]:
    if jobs <= 1:
        return [task() for task in tasks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(task) for task in tasks]
        return [f.result() for f in futures]


def error_percent(predicted: np.ndarray, truth: np.ndarray) -> float:
    return float((np.asarray(predicted) != np.asarray(truth)).mean() * 100.0)


def outer_cv_eval(
    dataset: Dataset,
    method: MethodSpec,
    w: int = 10,
    n_folds: int = 10,
    seed: int = 0,
    jobs: int = 1,
) -> EvalResult:
    """W-fold evaluation: per outer fold, fit the method on the outer-train
    part (any internal cross-validation happens inside it) and score the rest."""
    from .data import split, stratified_folds  # local import keeps module load light

    plan = stratified_folds(dataset, w, derive_seed(seed, "outer-folds"))

    def make_task(fold: int) -> Callable[[], float]:
        def task() -> float:
            train, test = split(dataset, plan, fold)
            fitted = method.fit(train, n_folds, derive_seed(seed, "fold", fold))
            return error_percent(fitted.predict_batch(test.x), test.require_labels())

        return task

    errors = _run_tasks([make_task(j) for j in range(w)], jobs)
    return _aggregate(method.canonical(), errors, seed)


def repeated_trials_eval(
    gen: GenSpec,
    train_n: int,
    test_n: int,
    method: MethodSpec,
    trials: int = 10,
    seed: int = 0,
    n_folds: int = 10,
    jobs: int = 1,
) -> EvalResult:
    """Synthetic protocol: per trial, draw fresh train and test sets, fit, score."""
    if trials < 1:
        raise ValueError("need at least one trial")

    def make_task(trial: int) -> Callable[[], float]:
        def task() -> float:
            train = gen.generate(train_n, derive_seed(seed, "trial", trial, "train"))
            test = gen.generate(test_n, derive_seed(seed, "trial", trial, "test"))
            fitted = method.fit(train, n_folds, derive_seed(seed, "trial", trial, "fit"))
            return error_percent(fitted.predict_batch(test.x), test.require_labels())

        return task

    errors = _run_tasks([make_task(t) for t in range(trials)], jobs)
    return _aggregate(method.canonical(), errors, seed)


def se_count(best_cv_error: float, worst_level0_error: float, best_cv_se: float) -> float:
    """How many of the selected model's standard errors separate it from the
    worst base learner; large values mean the base learners are uneven."""
    if best_cv_se <= 0:
        raise ValueError("standard error must be positive")
    return (worst_level0_error - best_cv_error) / best_cv_se


# ---------------------------------------------------------------------------
# Reports


@dataclass(frozen=True)
class WeightDump:
    """Combination-weight table of a fitted linear combiner."""

    model_names: tuple[str, ...]
    class_values: tuple[str, ...]
    columns: tuple[str, ...]
    weights: tuple[tuple[float, ...], ...]  # one row per class
    intercepts: tuple[float, ...] | None = None

    def to_dict(self) -> dict:
        return {
            "model_names": list(self.model_names),
            "class_values": list(self.class_values),
            "columns": list(self.columns),
            "weights": [list(row) for row in self.weights],
            "intercepts": None if self.intercepts is None else list(self.intercepts),
        }

    @classmethod
    def from_dict(cls, d: dict) -> WeightDump:
        return cls(
            model_names=tuple(d["model_names"]),
            class_values=tuple(d["class_values"]),
            columns=tuple(d["columns"]),
            weights=tuple(tuple(float(v) for v in row) for row in d["weights"]),
            intercepts=None if d["intercepts"] is None else tuple(float(v) for v in d["intercepts"]),
        )


def weight_dump(weights: WeightMatrix, model_names: Sequence[str], class_values: Sequence[str]) -> WeightDump:
    if weights.variant.scope is FeatureScope.PER_CLASS:
        columns = tuple(model_names)
    else:
        columns = tuple(f"{model_names[c.model]}[{class_values[c.class_index]}]" for c in weights.columns)
    return WeightDump(
        model_names=tuple(model_names),
        class_values=tuple(class_values),
        columns=columns,
        weights=tuple(tuple(float(v) for v in row) for row in weights.coef),
        intercepts=None if weights.intercepts is None else tuple(float(v) for v in weights.intercepts),
    )


@dataclass(frozen=True)
class Report:
    """Self-contained experiment record: re-runnable from the echoed config."""

    dataset: dict
    results: tuple[EvalResult, ...]
    config: dict
    se_count: float | None = None
    weights: WeightDump | None = None
    version: int = REPORT_VERSION
    tool_version: str = _tool_version

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "tool_version": self.tool_version,
            "dataset": self.dataset,
            "config": self.config,
            "results": [r.to_dict() for r in self.results],
            "se_count": self.se_count,
            "weights": None if self.weights is None else self.weights.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> Report:
        return cls(
            dataset=d["dataset"],
            results=tuple(EvalResult.from_dict(r) for r in d["results"]),
            config=d["config"],
            se_count=None if d["se_count"] is None else float(d["se_count"]),
            weights=None if d["weights"] is None else WeightDump.from_dict(d["weights"]),
            version=int(d["version"]),
            tool_version=d["tool_version"],
        )


def report_to_json(report: Report) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def parse_report(text: str) -> Report:
    return Report.from_dict(json.loads(text))


def emit_report(report: Report, path, fmt: str = "machine") -> None:
    """Write the machine (JSON) or human (aligned table) form of a report."""
    if fmt == "machine":
        payload = report_to_json(report)
    elif fmt == "table":
        payload = render_table(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    with open(path, "w") as f:
        f.write(payload)


def render_table(report: Report) -> str:
    """Aligned text table; the lowest mean error is starred."""
    lines = [f"dataset: {json.dumps(report.dataset, sort_keys=True)}"]
    name_width = max([len(r.method) for r in report.results] + [len("method")])
    lines.append(f"{'method'.ljust(name_width)}  {'error%':>8}  {'se':>6}")
    best = min(r.mean_error for r in report.results) if report.results else None
    for r in report.results:
        star = "*" if r.mean_error == best else " "
        lines.append(f"{r.method.ljust(name_width)}  {star}{r.mean_error:7.1f}  {r.std_error:6.1f}")
    if report.se_count is not None:
        lines.append(f"#SE: {report.se_count:.1f}")
    if report.weights is not None:
        lines.append("")
        lines.append("combination weights:")
        dump = report.weights
        col_width = max([len(c) for c in dump.columns] + [6])
        header = "class".ljust(12) + "  " + "  ".join(c.rjust(col_width) for c in dump.columns)
        if dump.intercepts is not None:
            header += "  " + "intercept".rjust(col_width)
        lines.append(header)
        for cls_name, row in zip(dump.class_values, dump.weights):
            cells = "  ".join(f"{v:{col_width}.2f}" for v in row)
            line = cls_name.ljust(12) + "  " + cells
            if dump.intercepts is not None:
                line += "  " + f"{dump.intercepts[dump.class_values.index(cls_name)]:{col_width}.2f}"
            lines.append(line)
    return "\n".join(lines) + "\n"
