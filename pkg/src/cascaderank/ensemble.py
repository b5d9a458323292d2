"""Blending engagement-trained and relevance-trained rankers.

Two routes to one scorer. `StackedModel` blends two already trained models
linearly. `train_stacked_gbrt` trains a single boosted ensemble whose rounds
alternate between the two supervision sources on a floor schedule, so the
gamma endpoints reproduce the single-source trainers tree for tree.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, DataError
from .rankmodels.base import RankModel
from .rankmodels.boosting import (
    DEFAULT_MARGIN,
    BoostEnsemble,
    _check_pairs,
    _line_search,
    _validate_boost_config,
    pairwise_hinge_gradient,
    pairwise_hinge_loss,
)
from .rankmodels.tree import fit_tree

GAMMA_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)
STACK_MODES = ("pairwise", "mixed_pointwise")


def stack_score(engagement_scores, relevance_scores, gamma: float) -> np.ndarray:
    """Linear blend gamma * engagement + (1 - gamma) * relevance."""
    if not 0.0 <= gamma <= 1.0:
        raise ConfigError(f"gamma must be in [0, 1], got {gamma}")
    s_e = np.asarray(engagement_scores, dtype=np.float64)
    s_r = np.asarray(relevance_scores, dtype=np.float64)
    if s_e.shape != s_r.shape:
        raise DataError("score arrays must have matching shapes")
    return gamma * s_e + (1.0 - gamma) * s_r


class StackedModel:
    """Serving-time blend of two scorers trained on different label sources."""

    kind = "stacked"

    def __init__(self, engagement_model: RankModel, relevance_model: RankModel, gamma: float):
        if not 0.0 <= gamma <= 1.0:
            raise ConfigError(f"gamma must be in [0, 1], got {gamma}")
        if engagement_model.subset != relevance_model.subset:
            raise ConfigError("stacked components must score the same feature subset")
        if engagement_model.n_features != relevance_model.n_features:
            raise ConfigError("stacked components disagree on feature width")
        self.engagement_model = engagement_model
        self.relevance_model = relevance_model
        self.gamma = float(gamma)
        self.schema_id = engagement_model.schema_id
        self.subset = engagement_model.subset
        self.n_features = engagement_model.n_features

    def score_matrix(self, X) -> np.ndarray:
        return stack_score(
            self.engagement_model.score_matrix(X),
            self.relevance_model.score_matrix(X),
            self.gamma,
        )

    def to_dict(self) -> dict:
        from .rankmodels.serialize import STACK_FORMAT, model_to_dict

        return {
            "format": STACK_FORMAT,
            "kind": self.kind,
            "gamma": self.gamma,
            "engagement_model": model_to_dict(self.engagement_model),
            "relevance_model": model_to_dict(self.relevance_model),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StackedModel":
        from .rankmodels.serialize import model_from_dict

        for field in ("gamma", "engagement_model", "relevance_model"):
            if field not in d:
                raise DataError(f"stacked model file is missing field {field!r}")
        return cls(
            engagement_model=model_from_dict(d["engagement_model"]),
            relevance_model=model_from_dict(d["relevance_model"]),
            gamma=d["gamma"],
        )


def _source_schedule(gamma: float, trees: int) -> list:
    """Round t trains on engagement iff floor(gamma*t) steps up at t.

    Over T rounds this hands engagement floor(gamma*T) rounds, spread as
    evenly as the grid allows; gamma 1 is all engagement, gamma 0 all
    relevance.
    """
    out = []
    for t in range(1, trees + 1):
        step_up = math.floor(gamma * t) > math.floor(gamma * (t - 1))
        out.append("engagement" if step_up else "relevance")
    return out


def train_stacked_gbrt(
    X,
    pairs_engagement,
    pairs_relevance,
    rows_engagement,
    rows_relevance,
    gamma: float,
    trees: int = 50,
    learning_rate: float = 0.1,
    max_depth: int = 3,
    min_leaf: int = 1,
    margin: float = DEFAULT_MARGIN,
    mode: str = "pairwise",
    relevance_labels=None,
    seed: int = 0,
    schema_id: str = "core-v1",
    subset: str = "full",
) -> BoostEnsemble:
    """One boosted ranker from two label sources, interleaved by gamma.

    Each round fits its tree only on the scheduled source's rows, against the
    gradient of that source's loss; the step size is then chosen on the
    combined objective gamma * L_eng + (1 - gamma) * L_rel. With gamma at an
    endpoint this reduces exactly to the single-source trainer: same trees,
    same step sizes.

    In "pairwise" mode both sources use the squared hinge over preference
    pairs. In "mixed_pointwise" mode relevance rounds fit squared error
    against `relevance_labels` instead, for groups too shallow to pair.
    """
    _validate_boost_config(trees, learning_rate, max_depth, min_leaf)
    if not 0.0 <= gamma <= 1.0:
        raise ConfigError(f"gamma must be in [0, 1], got {gamma}")
    if mode not in STACK_MODES:
        raise ConfigError(f"mode must be one of {STACK_MODES}, got {mode!r}")
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    if n == 0:
        raise DataError("training set is empty")
    rows_e = np.asarray(rows_engagement, dtype=np.int64)
    rows_r = np.asarray(rows_relevance, dtype=np.int64)
    if len(rows_e) == 0 or len(rows_r) == 0:
        raise DataError("both sources need at least one row")
    pairs_e = _check_pairs(pairs_engagement, n)
    if mode == "pairwise":
        pairs_r = _check_pairs(pairs_relevance, n)
        rel_y = None
    else:
        if relevance_labels is None:
            raise ConfigError("mixed_pointwise mode requires relevance_labels")
        rel_y = np.asarray(relevance_labels, dtype=np.float64)
        if len(rel_y) != len(rows_r):
            raise DataError("relevance_labels must align with rows_relevance")
        pairs_r = (
            _check_pairs(pairs_relevance, n)
            if pairs_relevance is not None and len(pairs_relevance)
            else np.empty((0, 2), dtype=np.int64)
        )

    def rel_loss(scores: np.ndarray) -> float:
        if mode == "pairwise":
            return pairwise_hinge_loss(scores, pairs_r, margin)
        diff = scores[rows_r] - rel_y
        return float(diff @ diff)

    def combined_loss(scores: np.ndarray) -> float:
        return gamma * pairwise_hinge_loss(scores, pairs_e, margin) + (1.0 - gamma) * rel_loss(
            scores
        )

    schedule = _source_schedule(gamma, trees)
    scores = np.zeros(n)
    fitted, etas = [], []
    curve = [combined_loss(scores)]
    # the hinge gradient helper already points downhill; mirror that for the
    # pointwise residual so every tree is fit to a descent direction
    for source in schedule:
        if source == "engagement":
            grad = pairwise_hinge_gradient(scores, pairs_e, margin)
            rows = rows_e
        elif mode == "pairwise":
            grad = pairwise_hinge_gradient(scores, pairs_r, margin)
            rows = rows_r
        else:
            grad = np.zeros(n)
            grad[rows_r] = 2.0 * (rel_y - scores[rows_r])
            rows = rows_r
        tree = fit_tree(X[rows], grad[rows], max_depth=max_depth, min_leaf=min_leaf)
        delta = tree.predict(X)
        eta, new_loss = _line_search(
            lambda e: combined_loss(scores + e * delta), curve[-1], learning_rate
        )
        scores = scores + eta * delta
        fitted.append(tree)
        etas.append(eta)
        curve.append(new_loss)

    return BoostEnsemble(
        kind="gbrt",
        base=0.0,
        trees=fitted,
        etas=etas,
        source_tags=schedule,
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
            "gamma": gamma,
            "mode": mode,
        },
        training={"loss_curve": curve},
    )


def select_gamma(train_fn, eval_fn, grid=GAMMA_GRID, weights=(0.5, 0.5)):
    """Pick gamma from a grid by a blended validation metric.

    `train_fn(gamma)` returns a model; `eval_fn(model)` returns the pair
    (engagement metric, relevance metric), each already averaged over the
    validation queries. The selection score is their weighted blend. Exact
    ties go to the smaller gamma.
    """
    if not grid:
        raise ConfigError("gamma grid is empty")
    w_e, w_r = weights
    best_gamma, best_model, best_score = None, None, -math.inf
    table = []
    for gamma in sorted(grid):
        if not 0.0 <= gamma <= 1.0:
            raise ConfigError(f"gamma grid values must be in [0, 1], got {gamma}")
        model = train_fn(gamma)
        m_e, m_r = eval_fn(model)
        score = w_e * float(m_e) + w_r * float(m_r)
        table.append({"gamma": gamma, "engagement": float(m_e), "relevance": float(m_r), "blend": score})
        if score > best_score:
            best_gamma, best_model, best_score = gamma, model, score
    return best_gamma, best_model, table
