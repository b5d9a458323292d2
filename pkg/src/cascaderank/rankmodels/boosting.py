"""Gradient-boosted tree ensembles: pointwise (squared error) and pairwise
(squared hinge with margin).

The pointwise booster starts from the global target mean and fits each tree to
the residuals, so training MSE never increases for learning rates in (0, 2).
The pairwise booster fits each tree to the negative gradient of the pair loss
and then picks the tree's scale by a deterministic candidate line search that
always includes scale 0, which makes the pair loss structurally non-increasing
round over round.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DataError
from .base import RankModel
from .tree import RegressionTree, fit_tree

DEFAULT_MARGIN = 1.0
# line-search candidates as fractions of the configured learning rate
_SCALE_FRACTIONS = (1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125)


class BoostEnsemble(RankModel):
    """Additive tree model: base + sum(eta_t * tree_t). `source_tags` records
    which training source each round's tree was fit on (single-source models
    tag every tree the same)."""

    def __init__(self, kind, base, trees, etas, source_tags, **header):
        self.kind = kind
        self.base = float(base)
        self.trees = list(trees)
        self.etas = [float(e) for e in etas]
        self.source_tags = list(source_tags)
        super().__init__(**header)

    def _scores(self, X: np.ndarray) -> np.ndarray:
        out = np.full(len(X), self.base, dtype=np.float64)
        for tree, eta in zip(self.trees, self.etas):
            if eta != 0.0:
                out += eta * tree.predict(X)
        return out

    def trees_per_source(self) -> dict:
        counts: dict = {}
        for tag in self.source_tags:
            counts[tag] = counts.get(tag, 0) + 1
        return counts

    def params_to_dict(self) -> dict:
        return {
            "base": self.base,
            "trees": [t.to_dict() for t in self.trees],
            "etas": self.etas,
            "source_tags": self.source_tags,
        }

    @classmethod
    def params_from_dict(cls, d: dict, header: dict) -> "BoostEnsemble":
        kind = header.pop("kind")
        return cls(
            kind=kind,
            base=d["base"],
            trees=[RegressionTree.from_dict(t) for t in d["trees"]],
            etas=d["etas"],
            source_tags=d["source_tags"],
            **header,
        )


def _check_pairs(pairs, n_rows: int) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise DataError("pairs must be an (m, 2) array of (winner, loser) row indices")
    if len(pairs) == 0:
        raise DataError("pairwise training needs at least one preference pair")
    if pairs.min() < 0 or pairs.max() >= n_rows:
        raise DataError("pair indices out of range")
    return pairs


def pairwise_hinge_loss(scores: np.ndarray, pairs: np.ndarray, margin: float = DEFAULT_MARGIN) -> float:
    """Sum of max(0, s(loser) - s(winner) + margin)^2 over pairs."""
    v = scores[pairs[:, 1]] - scores[pairs[:, 0]] + margin
    act = np.maximum(v, 0.0)
    return float(np.dot(act, act))


def pairwise_hinge_gradient(scores: np.ndarray, pairs: np.ndarray, margin: float = DEFAULT_MARGIN) -> np.ndarray:
    """Negative gradient of the pair loss per instance score. Pairs already
    separated by more than the margin contribute exactly zero."""
    v = scores[pairs[:, 1]] - scores[pairs[:, 0]] + margin
    act = np.maximum(v, 0.0)
    g = np.zeros_like(scores)
    np.add.at(g, pairs[:, 0], 2.0 * act)
    np.add.at(g, pairs[:, 1], -2.0 * act)
    return g


def _validate_boost_config(trees: int, learning_rate: float, max_depth: int, min_leaf: int) -> None:
    if trees < 1:
        raise ConfigError("number of boosting rounds must be >= 1")
    if not (0.0 < learning_rate < 2.0):
        raise ConfigError("learning_rate must be in (0, 2)")
    if max_depth < 0:
        raise ConfigError("max_depth must be >= 0")
    if min_leaf < 1:
        raise ConfigError("min_leaf must be >= 1")


def train_gbdt(
    X,
    y,
    trees: int = 50,
    learning_rate: float = 0.1,
    max_depth: int = 3,
    min_leaf: int = 1,
    seed: int = 0,
    schema_id: str = "core-v1",
    subset: str = "full",
) -> BoostEnsemble:
    """Pointwise booster on squared error; residual fit per round."""
    _validate_boost_config(trees, learning_rate, max_depth, min_leaf)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(X) == 0:
        raise DataError("training set is empty")
    base = float(y.mean())
    F = np.full(len(y), base)
    fitted, curve = [], []
    for _ in range(trees):
        tree = fit_tree(X, y - F, max_depth=max_depth, min_leaf=min_leaf)
        F += learning_rate * tree.predict(X)
        fitted.append(tree)
        curve.append(float(np.mean((y - F) ** 2)))
    return BoostEnsemble(
        kind="gbdt",
        base=base,
        trees=fitted,
        etas=[learning_rate] * trees,
        source_tags=["engagement"] * trees,
        schema_id=schema_id,
        subset=subset,
        n_features=X.shape[1],
        seed=seed,
        hyper={"trees": trees, "learning_rate": learning_rate, "max_depth": max_depth, "min_leaf": min_leaf},
        training={"loss_curve": curve},
    )


def _line_search(loss_fn, current_loss: float, learning_rate: float):
    """Pick the candidate scale with the lowest loss; scale 0 (keep the
    ensemble unchanged) is the implicit fallback, so the chosen loss never
    exceeds the current one. Ties prefer the larger scale."""
    best_scale, best_loss = 0.0, current_loss
    for frac in _SCALE_FRACTIONS:
        s = learning_rate * frac
        loss = loss_fn(s)
        if loss < best_loss:
            best_scale, best_loss = s, loss
    return best_scale, best_loss


def train_gbrt(
    X,
    pairs,
    trees: int = 50,
    learning_rate: float = 0.1,
    max_depth: int = 3,
    min_leaf: int = 1,
    margin: float = DEFAULT_MARGIN,
    seed: int = 0,
    schema_id: str = "core-v1",
    subset: str = "full",
    source_tag: str = "engagement",
) -> BoostEnsemble:
    """Pairwise booster on the squared hinge with margin."""
    _validate_boost_config(trees, learning_rate, max_depth, min_leaf)
    if margin < 0:
        raise ConfigError("margin must be >= 0")
    X = np.asarray(X, dtype=np.float64)
    pairs = _check_pairs(pairs, len(X))
    H = np.zeros(len(X))
    fitted, etas, curve = [], [], []
    loss = pairwise_hinge_loss(H, pairs, margin)
    for _ in range(trees):
        g = pairwise_hinge_gradient(H, pairs, margin)
        tree = fit_tree(X, g, max_depth=max_depth, min_leaf=min_leaf)
        pred = tree.predict(X)
        scale, loss = _line_search(lambda s: pairwise_hinge_loss(H + s * pred, pairs, margin), loss, learning_rate)
        H += scale * pred
        fitted.append(tree)
        etas.append(scale)
        curve.append(loss)
    return BoostEnsemble(
        kind="gbrt",
        base=0.0,
        trees=fitted,
        etas=etas,
        source_tags=[source_tag] * trees,
        schema_id=schema_id,
        subset=subset,
        n_features=X.shape[1],
        seed=seed,
        hyper={
            "trees": trees,
            "learning_rate": learning_rate,
            "max_depth": max_depth,
            "min_leaf": min_leaf,
            "margin": margin,
        },
        training={"loss_curve": curve},
    )
