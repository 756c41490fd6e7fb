"""Typed tabular datasets: schemas, CSV ingestion, and stratified fold plans.

Nominal cells are stored as indices into the attribute's value list;
continuous cells are stored as floats.  Both live in a single float64
matrix so the learners can work on numpy arrays directly.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

MISSING_TOKEN = "?"


@dataclass(frozen=True)
class AttributeKind:
    """Domain of one attribute: a tuple of nominal values, or None for continuous."""

    values: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.values is not None:
            object.__setattr__(self, "values", tuple(self.values))
            if not self.values:
                raise ValueError("nominal attribute needs a non-empty value list")
            if len(set(self.values)) != len(self.values):
                raise ValueError(f"duplicate nominal values: {self.values}")

    @classmethod
    def continuous(cls) -> AttributeKind:
        return cls(None)

    @classmethod
    def nominal(cls, values: Iterable[str]) -> AttributeKind:
        return cls(tuple(values))

    @classmethod
    def binary(cls, first: str = "0", second: str = "1") -> AttributeKind:
        return cls((first, second))

    @property
    def is_continuous(self) -> bool:
        return self.values is None

    @property
    def is_nominal(self) -> bool:
        return self.values is not None

    @property
    def is_binary(self) -> bool:
        return self.values is not None and len(self.values) == 2

    def with_missing(self) -> AttributeKind:
        """Return this kind extended with a dedicated missing-value category."""
        if self.values is None:
            raise ValueError("continuous attributes impute, they do not extend")
        if MISSING_TOKEN in self.values:
            return self
        return AttributeKind(self.values + (MISSING_TOKEN,))


@dataclass(frozen=True)
class Attribute:
    name: str
    kind: AttributeKind


@dataclass(frozen=True)
class Schema:
    """Ordered attribute list plus the class value list (class column is last in CSVs)."""

    attributes: tuple[Attribute, ...]
    class_values: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "class_values", tuple(self.class_values))
        if len(self.class_values) < 2:
            raise ValueError("a schema needs at least 2 class values")
        if len(set(self.class_values)) != len(self.class_values):
            raise ValueError("duplicate class values")
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ValueError("duplicate attribute names")

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    @property
    def n_classes(self) -> int:
        return len(self.class_values)

    @cached_property
    def continuous_indices(self) -> np.ndarray:
        idx = np.array([i for i, a in enumerate(self.attributes) if a.kind.is_continuous], dtype=np.intp)
        idx.setflags(write=False)
        return idx

    @cached_property
    def nominal_indices(self) -> np.ndarray:
        idx = np.array([i for i, a in enumerate(self.attributes) if a.kind.is_nominal], dtype=np.intp)
        idx.setflags(write=False)
        return idx

    def value_count(self, attr: int) -> int:
        values = self.attributes[attr].kind.values
        if values is None:
            raise ValueError(f"attribute {self.attributes[attr].name} is continuous")
        return len(values)

    def to_dict(self) -> dict:
        return {
            "attributes": [
                {"name": a.name, "values": None if a.kind.values is None else list(a.kind.values)}
                for a in self.attributes
            ],
            "class_values": list(self.class_values),
        }

    @classmethod
    def from_dict(cls, d: dict) -> Schema:
        attrs = tuple(
            Attribute(a["name"], AttributeKind(None if a["values"] is None else tuple(a["values"])))
            for a in d["attributes"]
        )
        return cls(attrs, tuple(d["class_values"]))


@dataclass(frozen=True)
class Instance:
    """One row: a cell per schema attribute, plus an optional class index.

    Nominal cells are value-list indices; continuous cells are floats.  A
    None cell marks a missing value, which is only legal before imputation.
    """

    values: tuple
    class_index: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))


def as_row(schema: Schema, x: Instance | Sequence) -> np.ndarray:
    """Validate an instance against a schema and return it as a float row."""
    values = x.values if isinstance(x, Instance) else tuple(x)
    if len(values) != schema.n_attributes:
        raise ValueError(f"expected {schema.n_attributes} cells, got {len(values)}")
    row = np.empty(schema.n_attributes, dtype=float)
    for i, (attr, cell) in enumerate(zip(schema.attributes, values)):
        if cell is None:
            raise ValueError(f"attribute {attr.name}: missing value (impute at load time)")
        v = float(cell)
        if attr.kind.is_nominal:
            if v != int(v) or not 0 <= int(v) < len(attr.kind.values):
                raise ValueError(f"attribute {attr.name}: nominal index {cell!r} out of range")
        elif not np.isfinite(v):
            raise ValueError(f"attribute {attr.name}: non-finite value {cell!r}")
        row[i] = v
    return row


class Dataset:
    """Immutable labeled (or unlabeled) table conforming to a schema."""

    __slots__ = ("schema", "x", "y")

    def __init__(self, schema: Schema, x: np.ndarray, y: np.ndarray | None = None):
        x = np.array(x, dtype=float, copy=True)
        if x.ndim != 2 or x.shape[1] != schema.n_attributes:
            raise ValueError(f"data matrix must be (n, {schema.n_attributes}), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("data matrix contains non-finite cells")
        for a in schema.nominal_indices:
            col = x[:, a]
            if np.any(col != np.floor(col)) or np.any(col < 0) or np.any(col >= schema.value_count(int(a))):
                raise ValueError(f"attribute {schema.attributes[a].name}: nominal index out of range")
        if y is not None:
            y = np.array(y, dtype=np.int64, copy=True)
            if y.shape != (x.shape[0],):
                raise ValueError("labels must be one per row")
            if y.size and (y.min() < 0 or y.max() >= schema.n_classes):
                raise ValueError("class index out of range")
            y.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __setattr__(self, name, value):
        raise AttributeError("Dataset is immutable")

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def n_classes(self) -> int:
        return self.schema.n_classes

    @property
    def labeled(self) -> bool:
        return self.y is not None

    def require_labels(self) -> np.ndarray:
        if self.y is None:
            raise ValueError("dataset has no class labels")
        return self.y

    def instance(self, i: int) -> Instance:
        cells = []
        for a, attr in enumerate(self.schema.attributes):
            v = self.x[i, a]
            cells.append(int(v) if attr.kind.is_nominal else float(v))
        label = None if self.y is None else int(self.y[i])
        return Instance(tuple(cells), label)

    @property
    def instances(self) -> list[Instance]:
        return [self.instance(i) for i in range(len(self))]

    def subset(self, indices) -> Dataset:
        indices = np.asarray(indices)
        y = None if self.y is None else self.y[indices]
        return Dataset(self.schema, self.x[indices], y)

    @classmethod
    def from_instances(cls, schema: Schema, instances: Sequence[Instance]) -> Dataset:
        rows = np.array([as_row(schema, inst) for inst in instances], dtype=float)
        rows = rows.reshape(len(instances), schema.n_attributes)
        labels = [inst.class_index for inst in instances]
        if all(l is None for l in labels):
            y = None
        elif any(l is None for l in labels):
            raise ValueError("mixed labeled and unlabeled instances")
        else:
            y = np.array(labels, dtype=np.int64)
        return cls(schema, rows, y)


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Assignment of every instance to one of ``n_folds`` cross-validation folds."""

    n_folds: int
    assignment: np.ndarray
    seed: int

    def __post_init__(self):
        a = np.array(self.assignment, dtype=np.int64, copy=True)
        if a.ndim != 1:
            raise ValueError("assignment must be one fold index per instance")
        if a.size and (a.min() < 0 or a.max() >= self.n_folds):
            raise ValueError("fold index out of range")
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    def __len__(self) -> int:
        return self.assignment.size

    def fold_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_folds)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)


def stratified_folds(dataset: Dataset, n_folds: int, seed: int) -> FoldPlan:
    """Assign instances to folds, balancing both fold sizes and per-class counts.

    Within each class the instances are shuffled and dealt round-robin; the
    dealing cursor carries over between classes, so total fold sizes also
    differ by at most one.
    """
    y = dataset.require_labels()
    n = len(dataset)
    if not 2 <= n_folds <= n:
        raise ValueError(f"fold count {n_folds} out of range for {n} instances")
    counts = np.bincount(y, minlength=dataset.n_classes)
    if np.any(counts == 0):
        missing = dataset.schema.class_values[int(np.argmin(counts))]
        raise ValueError(f"class {missing!r} has no instances")
    rng = np.random.default_rng(seed)
    assignment = np.empty(n, dtype=np.int64)
    cursor = 0
    for c in range(dataset.n_classes):
        idx = np.flatnonzero(y == c)
        rng.shuffle(idx)
        for i in idx:
            assignment[i] = cursor % n_folds
            cursor += 1
    return FoldPlan(n_folds, assignment, seed)


def split(dataset: Dataset, plan: FoldPlan, fold: int) -> tuple[Dataset, Dataset]:
    """Return the (train, test) pair for one fold of the plan."""
    if len(plan) != len(dataset):
        raise ValueError("fold plan does not match dataset size")
    if not 0 <= fold < plan.n_folds:
        raise ValueError(f"fold {fold} out of range for {plan.n_folds} folds")
    test_mask = plan.assignment == fold
    return dataset.subset(np.flatnonzero(~test_mask)), dataset.subset(np.flatnonzero(test_mask))


def load_csv(path, schema: Schema, has_header: bool = False, labeled: bool = True) -> Dataset:
    """Load a comma-separated file against a schema (class column last).

    Missing cells are written as "?".  Continuous ones are imputed with the
    column mean; nominal ones get a dedicated extra category appended to the
    attribute's value list, so the returned dataset's schema may extend the
    one passed in.
    """
    width = schema.n_attributes + (1 if labeled else 0)
    raw_rows: list[list[str]] = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        for lineno, row in enumerate(reader, start=1):
            if has_header and lineno == 1:
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != width:
                raise ValueError(f"{path}: line {lineno}: expected {width} columns, got {len(row)}")
            raw_rows.append([cell.strip() for cell in row])

    n = len(raw_rows)
    x = np.zeros((n, schema.n_attributes), dtype=float)
    missing = np.zeros((n, schema.n_attributes), dtype=bool)
    y = np.zeros(n, dtype=np.int64) if labeled else None

    class_index = {v: i for i, v in enumerate(schema.class_values)}
    kinds = list(schema.attributes)
    for r, row in enumerate(raw_rows):
        for a, attr in enumerate(kinds):
            tok = row[a]
            values = attr.kind.values
            if values is not None:
                if tok in values:
                    x[r, a] = values.index(tok)
                elif tok == MISSING_TOKEN:
                    missing[r, a] = True
                else:
                    raise ValueError(f"{path}: line {r + 1}: unknown nominal value {tok!r} for attribute {attr.name}")
            else:
                if tok == MISSING_TOKEN:
                    missing[r, a] = True
                else:
                    try:
                        x[r, a] = float(tok)
                    except ValueError:
                        raise ValueError(f"{path}: line {r + 1}: cannot parse {tok!r} as a number "
                                         f"for attribute {attr.name}") from None
        if labeled:
            tok = row[-1]
            if tok not in class_index:
                raise ValueError(f"{path}: line {r + 1}: unknown class value {tok!r}")
            y[r] = class_index[tok]

    new_attrs = list(schema.attributes)
    for a, attr in enumerate(kinds):
        col_missing = missing[:, a]
        if not col_missing.any():
            continue
        if attr.kind.is_continuous:
            observed = x[~col_missing, a]
            x[col_missing, a] = observed.mean() if observed.size else 0.0
        else:
            extended = attr.kind.with_missing()
            new_attrs[a] = Attribute(attr.name, extended)
            x[col_missing, a] = len(extended.values) - 1
    out_schema = schema if new_attrs == list(schema.attributes) else Schema(tuple(new_attrs), schema.class_values)
    return Dataset(out_schema, x, y)


def save_csv(dataset: Dataset, path) -> None:
    """Write a dataset in the format load_csv reads (floats via repr, so they round-trip)."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        for i in range(len(dataset)):
            row = []
            for a, attr in enumerate(dataset.schema.attributes):
                v = dataset.x[i, a]
                row.append(attr.kind.values[int(v)] if attr.kind.is_nominal else repr(float(v)))
            if dataset.y is not None:
                row.append(dataset.schema.class_values[int(dataset.y[i])])
            writer.writerow(row)


def save_schema(schema: Schema, path) -> None:
    """Write the sidecar format: one ``name:kind[:v1|v2|...]`` line per attribute, class last."""
    lines = []
    for attr in schema.attributes:
        if ":" in attr.name or "|" in attr.name:
            raise ValueError(f"attribute name {attr.name!r} cannot contain ':' or '|'")
        kind = attr.kind
        if kind.is_continuous:
            lines.append(f"{attr.name}:continuous")
        elif kind.is_binary:
            lines.append(f"{attr.name}:binary:{'|'.join(kind.values)}")
        else:
            lines.append(f"{attr.name}:nominal:{'|'.join(kind.values)}")
    lines.append("class:" + "|".join(schema.class_values))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_schema(path) -> Schema:
    with open(path) as f:
        lines = [line.strip() for line in f if line.strip()]
    if not lines or not lines[-1].startswith("class:"):
        raise ValueError(f"{path}: last line must declare the class values")
    class_values = tuple(lines[-1][len("class:"):].split("|"))
    attrs = []
    for line in lines[:-1]:
        parts = line.split(":", 2)
        if len(parts) < 2:
            raise ValueError(f"{path}: malformed attribute line {line!r}")
        name, kind = parts[0], parts[1]
        if kind == "continuous":
            attrs.append(Attribute(name, AttributeKind.continuous()))
        elif kind in ("nominal", "binary"):
            if len(parts) != 3:
                raise ValueError(f"{path}: attribute {name!r} needs a value list")
            values = tuple(parts[2].split("|"))
            if kind == "binary" and len(values) != 2:
                raise ValueError(f"{path}: binary attribute {name!r} needs exactly 2 values")
            attrs.append(Attribute(name, AttributeKind.nominal(values)))
        else:
            raise ValueError(f"{path}: unknown attribute kind {kind!r}")
    return Schema(tuple(attrs), class_values)
