"""Binary decision trees: shared node types and greedy CART fitting.

Split rule everywhere: go left iff ``value <= threshold``.  Fitting is
fully deterministic; candidate thresholds are midpoints between adjacent
distinct sorted values and ties in gain break toward the lowest feature
index, then the lowest threshold, which exact-equality argmax scans give
for free.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class Leaf:
    """Terminal node: raw score and the training-weight mass that reached it."""

    value: float
    cover: float


@dataclass(frozen=True)
class Split:
    """Internal node; left subtree takes rows with value <= threshold."""

    feature_index: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Split]


def node_cover(node: TreeNode) -> float:
    if isinstance(node, Leaf):
        return node.cover
    return node_cover(node.left) + node_cover(node.right)


def tree_depth(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


def tree_predict_one(node: TreeNode, x: np.ndarray) -> float:
    """Descend the split rules for a single row."""
    while isinstance(node, Split):
        node = node.left if x[node.feature_index] <= node.threshold else node.right
    return node.value


class FlatTree:
    """Array view of a TreeNode for vectorized prediction and explanation.

    Nodes are laid out in pre-order; ``feature[i] == -1`` marks a leaf.
    Every node's cover must be positive (explanations condition on it).
    """

    __slots__ = ("feature", "threshold", "left", "right", "value", "cover")

    def __init__(self, root: TreeNode):
        feature: list[int] = []
        threshold: list[float] = []
        left: list[int] = []
        right: list[int] = []
        value: list[float] = []
        cover: list[float] = []

        def add(node: TreeNode) -> int:
            i = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            cover.append(0.0)
            if isinstance(node, Leaf):
                value[i] = node.value
                cover[i] = node.cover
            else:
                feature[i] = node.feature_index
                threshold[i] = node.threshold
                left[i] = add(node.left)
                right[i] = add(node.right)
                cover[i] = cover[left[i]] + cover[right[i]]
            return i

        add(root)
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)
        self.cover = np.asarray(cover, dtype=np.float64)
        if np.any(self.cover <= 0.0):
            raise ValueError("invalid model: node with non-positive cover")

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Leaf values for every row of X."""
        n = X.shape[0]
        node = np.zeros(n, dtype=np.int64)
        active = self.feature[node] >= 0
        while np.any(active):
            idx = node[active]
            f = self.feature[idx]
            go_left = X[active, f] <= self.threshold[idx]
            node[active] = np.where(go_left, self.left[idx], self.right[idx])
            active = self.feature[node] >= 0
        return self.value[node]

    def expected_value(self) -> float:
        """Cover-weighted mean leaf value (the tree's output on no information)."""
        leaves = self.feature < 0
        total = self.cover[leaves].sum()
        return float((self.value[leaves] * self.cover[leaves]).sum() / total)


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 6
    min_samples_leaf: int = 1
    min_gain: float = 0.0

    def __post_init__(self) -> None:
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")


def _best_gini_split(
    X: np.ndarray, y: np.ndarray, w: np.ndarray, min_samples_leaf: int
) -> tuple[float, int, float] | None:
    """Best (gain, feature, threshold) by Gini impurity decrease, or None."""
    n, n_features = X.shape
    total_w = w.sum()
    total_wy = (w * y).sum()
    p = total_wy / total_w
    parent_gini = 2.0 * p * (1.0 - p)

    best_gain = -np.inf
    best: tuple[float, int, float] | None = None
    for j in range(n_features):
        col = X[:, j]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        distinct = xs[1:] > xs[:-1]
        if not distinct.any():
            continue
        ws = w[order]
        wys = (w * y)[order]
        cw = np.cumsum(ws)[:-1]
        cwy = np.cumsum(wys)[:-1]
        counts = np.arange(1, n)

        valid = distinct & (counts >= min_samples_leaf) & (n - counts >= min_samples_leaf)
        if not valid.any():
            continue
        lw = cw
        rw = total_w - cw
        lp = np.divide(cwy, lw, out=np.zeros_like(cwy), where=lw > 0)
        rp = np.divide(total_wy - cwy, rw, out=np.zeros_like(cwy), where=rw > 0)
        child = (lw * 2.0 * lp * (1.0 - lp) + rw * 2.0 * rp * (1.0 - rp)) / total_w
        gain = np.where(valid, parent_gini - child, -np.inf)

        k = int(np.argmax(gain))
        if gain[k] > best_gain:
            best_gain = float(gain[k])
            best = (best_gain, j, float((xs[k] + xs[k + 1]) / 2.0))
    return best


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    params: TreeParams = TreeParams(),
    sample_weight: np.ndarray | None = None,
) -> TreeNode:
    """Greedy binary CART classifier minimizing Gini impurity.

    Leaf value is the weighted class-1 fraction; cover is the weight sum.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise ValueError("X must be 2-D with one label per row and at least one row")
    w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)

    def grow(idx: np.ndarray, depth: int) -> TreeNode:
        yi, wi = y[idx], w[idx]
        cover = float(wi.sum())
        value = float((wi * yi).sum() / cover)
        if depth >= params.max_depth or len(idx) < 2 * params.min_samples_leaf:
            return Leaf(value, cover)
        if value in (0.0, 1.0):
            return Leaf(value, cover)
        best = _best_gini_split(X[idx], yi, wi, params.min_samples_leaf)
        if best is None or best[0] <= params.min_gain:
            return Leaf(value, cover)
        _, j, thr = best
        mask = X[idx, j] <= thr
        return Split(j, thr, grow(idx[mask], depth + 1), grow(idx[~mask], depth + 1))

    return grow(np.arange(len(y)), 0)
