"""Decision tree induction with gain-ratio splits and pessimistic-error pruning.

Splits are multiway on nominal attributes and binary (midpoint threshold) on
continuous ones.  Leaves keep the full class-count vector so the model can
emit Laplace-corrected class probabilities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..data import Dataset, Instance, Schema, as_row


@dataclass(frozen=True)
class TreeParams:
    """min_branch: a split must leave at least two branches holding this many rows.
    cf: confidence level of the pessimistic error estimate used when pruning."""

    min_branch: int = 2
    prune: bool = True
    cf: float = 0.25

    def __post_init__(self):
        if self.min_branch < 1:
            raise ValueError("min_branch must be at least 1")
        if not 0.0 < self.cf < 1.0:
            raise ValueError("cf must lie in (0, 1)")


class Node:
    """Tree node: internal when ``attr`` is set, leaf otherwise.

    Continuous splits store ``threshold`` and ``children = (low, high)``;
    nominal splits store ``children`` as a dict keyed by value index.  Every
    node keeps its training class counts so unseen nominal values can fall
    back to the node's own distribution.
    """

    __slots__ = ("counts", "attr", "threshold", "children", "probs")

    def __init__(self, counts: np.ndarray):
        self.counts = counts
        self.attr: int | None = None
        self.threshold: float | None = None
        self.children = None
        self.probs: np.ndarray | None = None

    @property
    def is_leaf(self) -> bool:
        return self.attr is None

    def make_leaf(self) -> None:
        self.attr = None
        self.threshold = None
        self.children = None

    def child_list(self) -> list[Node]:
        if self.children is None:
            return []
        if isinstance(self.children, dict):
            return list(self.children.values())
        return list(self.children)


def leaf_class_probs(counts, n_classes: int | None = None) -> np.ndarray:
    """Laplace-corrected class distribution of a leaf.

    With m_i instances of class i and majority class M, the majority gets
    1 - (E + 1) / (sum_i m_i + 2) where E is the count of non-majority
    instances; the remainder is shared among the other classes in proportion
    to their counts, or uniformly when the leaf is pure (E = 0).
    """
    m = np.asarray(counts, dtype=float)
    if n_classes is not None and m.shape != (n_classes,):
        raise ValueError(f"expected {n_classes} counts")
    total = m.sum()
    maj = int(np.argmax(m))
    errors = total - m[maj]
    residual = (errors + 1.0) / (total + 2.0)
    p = np.zeros(m.size, dtype=float)
    if errors > 0:
        p = residual * (m / errors)
    else:
        p.fill(residual / (m.size - 1))
    p[maj] = 0.0
    p[maj] = 1.0 - p.sum()
    return p


def _entropy(counts: np.ndarray) -> float:
    n = counts.sum()
    if n <= 0:
        return 0.0
    nz = counts[counts > 0]
    return float(math.log2(n) - (nz * np.log2(nz)).sum() / n)


def _xlog2x_rows(counts: np.ndarray) -> np.ndarray:
    out = np.zeros_like(counts, dtype=float)
    mask = counts > 0
    out[mask] = counts[mask] * np.log2(counts[mask])
    return out.sum(axis=1)


@dataclass
class _Candidate:
    attr: int
    gain: float
    ratio: float
    threshold: float | None = None


def _nominal_candidate(codes, y_sub, n_classes, n_values, node_entropy, min_branch):
    table = np.bincount(codes * n_classes + y_sub, minlength=n_values * n_classes)
    table = table.reshape(n_values, n_classes)
    branch_n = table.sum(axis=1)
    nonempty = branch_n > 0
    if nonempty.sum() < 2 or (branch_n >= min_branch).sum() < 2:
        return None
    n = branch_n.sum()
    weights = branch_n[nonempty] / n
    branch_entropy = np.array([_entropy(row) for row in table[nonempty]])
    gain = node_entropy - float(weights @ branch_entropy)
    split_info = -float(weights @ np.log2(weights))
    return gain, split_info


def _continuous_candidate(values, y_sub, n_classes, node_entropy, min_branch):
    order = np.argsort(values, kind="stable")
    vs = values[order]
    ys = y_sub[order]
    n = vs.size
    one_hot = np.zeros((n, n_classes))
    one_hot[np.arange(n), ys] = 1.0
    left = np.cumsum(one_hot, axis=0)[:-1]
    n_left = np.arange(1, n, dtype=float)
    n_right = n - n_left
    valid = (vs[:-1] < vs[1:]) & (n_left >= min_branch) & (n_right >= min_branch)
    if not valid.any():
        return None
    right = left[-1] + one_hot[-1] - left
    with np.errstate(divide="ignore", invalid="ignore"):
        h_left = np.where(n_left > 0, np.log2(n_left) - _xlog2x_rows(left) / n_left, 0.0)
        h_right = np.where(n_right > 0, np.log2(n_right) - _xlog2x_rows(right) / n_right, 0.0)
    gains = node_entropy - (n_left * h_left + n_right * h_right) / n
    gains[~valid] = -np.inf
    best = int(np.argmax(gains))
    gain = float(gains[best])
    wl = n_left[best] / n
    split_info = -(wl * math.log2(wl) + (1 - wl) * math.log2(1 - wl))
    threshold = (vs[best] + vs[best + 1]) / 2.0
    return gain, split_info, threshold


def _best_split(x, y, idx, schema: Schema, node_entropy: float, min_branch: int) -> _Candidate | None:
    candidates: list[_Candidate] = []
    y_sub = y[idx]
    for a, attr in enumerate(schema.attributes):
        if attr.kind.is_nominal:
            codes = x[idx, a].astype(np.int64)
            found = _nominal_candidate(codes, y_sub, schema.n_classes,
                                       len(attr.kind.values), node_entropy, min_branch)
            if found is None:
                continue
            gain, split_info = found
            candidates.append(_Candidate(a, max(gain, 0.0), max(gain, 0.0) / split_info))
        else:
            found = _continuous_candidate(x[idx, a], y_sub, schema.n_classes, node_entropy, min_branch)
            if found is None:
                continue
            gain, split_info, threshold = found
            candidates.append(_Candidate(a, max(gain, 0.0), max(gain, 0.0) / split_info, threshold))
    if not candidates:
        return None
    # Standard selection: best gain ratio among splits with at least average gain.
    avg_gain = sum(c.gain for c in candidates) / len(candidates)
    best = None
    for c in candidates:
        if c.gain + 1e-12 < avg_gain:
            continue
        if best is None or c.ratio > best.ratio:
            best = c
    return best


# Confidence-to-deviation lookup used by the pessimistic error estimate.
_CONF_LEVELS = (0.0, 0.001, 0.005, 0.01, 0.05, 0.10, 0.20, 0.40, 1.00)
_CONF_DEVIATIONS = (4.0, 3.09, 2.58, 2.33, 1.65, 1.28, 0.84, 0.25, 0.00)


def _squared_deviation(cf: float) -> float:
    i = 0
    while cf > _CONF_LEVELS[i]:
        i += 1
    lo, hi = _CONF_LEVELS[i - 1], _CONF_LEVELS[i]
    dlo, dhi = _CONF_DEVIATIONS[i - 1], _CONF_DEVIATIONS[i]
    z = dlo + (dhi - dlo) * (cf - lo) / (hi - lo)
    return z * z


def added_errors(n: float, e: float, cf: float) -> float:
    """Pessimistic upper-bound correction added to ``e`` observed errors out of ``n``."""
    if n <= 0:
        return 0.0
    if e < 1e-6:
        return n * (1.0 - cf ** (1.0 / n))
    if e < 0.9999:
        base = n * (1.0 - cf ** (1.0 / n))
        return base + e * (added_errors(n, 1.0, cf) - base)
    if e + 0.5 >= n:
        return 0.67 * (n - e)
    z2 = _squared_deviation(cf)
    eh = e + 0.5
    pr = (eh + z2 / 2 + math.sqrt(z2 * (eh * (1 - eh / n) + z2 / 4))) / (n + z2)
    return n * pr - e


def _node_leaf_estimate(node: Node, cf: float) -> float:
    n = float(node.counts.sum())
    e = n - float(node.counts.max())
    return e + added_errors(n, e, cf)


def _prune(root: Node, cf: float) -> None:
    # Post-order walk without recursion: children are pruned before parents,
    # and a subtree collapses to a leaf when binding it no worse (within the
    # usual 0.1 slack) than the sum of its pruned children's estimates.
    order: list[Node] = []
    stack = [root]
    while stack:
        node = stack.pop()
        order.append(node)
        stack.extend(node.child_list())
    estimates: dict[int, float] = {}
    for node in reversed(order):
        if node.is_leaf:
            estimates[id(node)] = _node_leaf_estimate(node, cf)
            continue
        subtree = sum(estimates[id(child)] for child in node.child_list())
        as_leaf = _node_leaf_estimate(node, cf)
        if as_leaf <= subtree + 0.1:
            node.make_leaf()
            estimates[id(node)] = as_leaf
        else:
            estimates[id(node)] = subtree


@dataclass
class TreeModel:
    schema: Schema
    params: TreeParams
    root: Node = field(repr=False)

    @property
    def n_classes(self) -> int:
        return self.schema.n_classes

    def probs_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.empty((x.shape[0], self.n_classes))
        work = [(self.root, np.arange(x.shape[0]))]
        while work:
            node, rows = work.pop()
            if rows.size == 0:
                continue
            if node.is_leaf:
                out[rows] = node.probs
                continue
            col = x[rows, node.attr]
            if node.threshold is not None:
                low = col <= node.threshold
                lo_child, hi_child = node.children
                work.append((lo_child, rows[low]))
                work.append((hi_child, rows[~low]))
            else:
                codes = col.astype(np.int64)
                seen = np.zeros(rows.size, dtype=bool)
                for code, child in node.children.items():
                    mask = codes == code
                    seen |= mask
                    work.append((child, rows[mask]))
                if not seen.all():
                    # value never observed at this node during training
                    out[rows[~seen]] = node.probs
        return out

    def n_leaves(self) -> int:
        count = 0
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                count += 1
            else:
                stack.extend(node.child_list())
        return count

    def depth(self) -> int:
        deepest = 0
        stack = [(self.root, 0)]
        while stack:
            node, d = stack.pop()
            deepest = max(deepest, d)
            stack.extend((c, d + 1) for c in node.child_list())
        return deepest

    def to_dict(self) -> dict:
        nodes: list[dict] = []
        index: dict[int, int] = {}
        order: list[Node] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            index[id(node)] = len(order)
            order.append(node)
            stack.extend(node.child_list())
        for node in order:
            entry: dict = {"counts": [float(c) for c in node.counts]}
            if not node.is_leaf:
                entry["attr"] = node.attr
                if node.threshold is not None:
                    entry["threshold"] = float(node.threshold)
                    entry["low"] = index[id(node.children[0])]
                    entry["high"] = index[id(node.children[1])]
                else:
                    entry["branches"] = {str(k): index[id(v)] for k, v in node.children.items()}
            nodes.append(entry)
        return {
            "kind": "tree",
            "schema": self.schema.to_dict(),
            "params": {"min_branch": self.params.min_branch, "prune": self.params.prune, "cf": self.params.cf},
            "nodes": nodes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> TreeModel:
        schema = Schema.from_dict(d["schema"])
        params = TreeParams(**d["params"])
        raw = d["nodes"]
        nodes = [Node(np.array(entry["counts"], dtype=float)) for entry in raw]
        for node, entry in zip(nodes, raw):
            if "attr" in entry:
                node.attr = int(entry["attr"])
                if "threshold" in entry:
                    node.threshold = float(entry["threshold"])
                    node.children = (nodes[entry["low"]], nodes[entry["high"]])
                else:
                    node.children = {int(k): nodes[v] for k, v in entry["branches"].items()}
        model = cls(schema, params, nodes[0])
        _fill_probs(model.root)
        return model


def _fill_probs(root: Node) -> None:
    stack = [root]
    while stack:
        node = stack.pop()
        node.probs = leaf_class_probs(node.counts)
        stack.extend(node.child_list())


def _seal_branches(root: Node) -> None:
    stack = [root]
    while stack:
        node = stack.pop()
        if isinstance(node.children, list):
            node.children = tuple(node.children)
        stack.extend(node.child_list())


def train_tree(train: Dataset, params: TreeParams = TreeParams()) -> TreeModel:
    """Grow a tree on the training data and (by default) prune it."""
    y = train.require_labels()
    if len(train) == 0:
        raise ValueError("cannot train a tree on an empty dataset")
    x = train.x
    schema = train.schema
    n_classes = schema.n_classes

    def make_node(idx: np.ndarray) -> tuple[Node, list[tuple[np.ndarray, object]]]:
        counts = np.bincount(y[idx], minlength=n_classes).astype(float)
        node = Node(counts)
        n = idx.size
        if counts.max() == n or n < 2 * params.min_branch:
            return node, []
        best = _best_split(x, y, idx, schema, _entropy(counts), params.min_branch)
        if best is None:
            return node, []
        node.attr = best.attr
        col = x[idx, best.attr]
        if best.threshold is not None:
            node.threshold = best.threshold
            low = col <= best.threshold
            node.children = [None, None]
            return node, [(idx[low], 0), (idx[~low], 1)]
        codes = col.astype(np.int64)
        node.children = {}
        return node, [(idx[codes == code], int(code)) for code in np.unique(codes)]

    # Explicit work stack: growth depth can approach n/2 on adversarial data,
    # which would overflow Python's recursion limit.
    root, pending = make_node(np.arange(len(train)))
    stack = [(root, idx, key) for idx, key in pending]
    while stack:
        parent, idx, key = stack.pop()
        child, pending = make_node(idx)
        parent.children[key] = child
        stack.extend((child, c_idx, c_key) for c_idx, c_key in pending)
    _seal_branches(root)
    if params.prune:
        _prune(root, params.cf)
    _fill_probs(root)
    return TreeModel(schema, params, root)


def tree_class_probs(model: TreeModel, x: Instance) -> np.ndarray:
    return model.probs_batch(as_row(model.schema, x)[None, :])[0]


@dataclass(frozen=True)
class TreeLearner:
    params: TreeParams = TreeParams()

    def fit(self, train: Dataset) -> TreeModel:
        return train_tree(train, self.params)
