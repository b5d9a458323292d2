"""Greedy variance-reduction regression trees, built from scratch.

Exact split search with deterministic tie-breaks: the best split is the one
with the largest sum-of-squares reduction; ties go to the lower feature index,
then the lower threshold. Leaves predict the mean target. Trees serialize to
flat parallel arrays so a JSON round trip reproduces predictions bit for bit.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DataError

_NO_FEATURE = -1
_GAIN_EPS = 1e-12


class RegressionTree:
    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        def walk(i):
            if self.feature[i] == _NO_FEATURE:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))

        return walk(0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        idx = np.zeros(len(X), dtype=np.int64)
        # route all rows level by level; loop count bounded by tree depth
        while True:
            feat = self.feature[idx]
            active = feat != _NO_FEATURE
            if not active.any():
                break
            rows = np.nonzero(active)[0]
            go_left = X[rows, feat[rows]] <= self.threshold[idx[rows]]
            idx[rows] = np.where(go_left, self.left[idx[rows]], self.right[idx[rows]])
        return self.value[idx]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        return cls(d["feature"], d["threshold"], d["left"], d["right"], d["value"])


def _best_split(X: np.ndarray, y: np.ndarray, rows: np.ndarray, min_leaf: int):
    """Exact best (feature, threshold) by sum-of-squares reduction, or None."""
    ysub = y[rows]
    n = len(rows)
    if n < 2 * min_leaf:
        return None
    total = ysub.sum()
    best_gain = _GAIN_EPS
    best = None
    for f in range(X.shape[1]):
        xs = X[rows, f]
        order = np.argsort(xs, kind="stable")
        xo = xs[order]
        yo = ysub[order]
        cut = np.nonzero(xo[1:] > xo[:-1])[0] + 1  # candidate left sizes
        cut = cut[(cut >= min_leaf) & (n - cut >= min_leaf)]
        if cut.size == 0:
            continue
        csum = np.cumsum(yo)
        left_sum = csum[cut - 1]
        right_sum = total - left_sum
        gain = left_sum**2 / cut + right_sum**2 / (n - cut) - total**2 / n
        k = int(np.argmax(gain))
        if gain[k] > best_gain:
            best_gain = float(gain[k])
            # threshold is the last value routed left; a midpoint could round
            # to the right-hand value and leave that child empty
            best = (f, float(xo[cut[k] - 1]))
    return best


def fit_tree(X, y, max_depth: int, min_leaf: int = 1) -> RegressionTree:
    """Fit a regression tree. Constant targets collapse to a single leaf no
    matter the depth budget."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise DataError("fit_tree needs a 2-D X and a matching target vector")
    if len(X) == 0:
        raise DataError("fit_tree needs at least one instance")
    if max_depth < 0:
        raise ConfigError("max_depth must be >= 0")
    if min_leaf < 1:
        raise ConfigError("min_leaf must be >= 1")

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(_NO_FEATURE)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    def build(rows: np.ndarray, depth: int) -> int:
        node = new_node()
        value[node] = float(y[rows].mean())
        if depth >= max_depth:
            return node
        split = _best_split(X, y, rows, min_leaf)
        if split is None:
            return node
        f, thr = split
        mask = X[rows, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = build(rows[mask], depth + 1)
        right[node] = build(rows[~mask], depth + 1)
        return node

    build(np.arange(len(X)), 0)
    return RegressionTree(feature, threshold, left, right, value)
