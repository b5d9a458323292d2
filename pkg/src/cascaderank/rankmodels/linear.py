"""Linear rankers: the pairwise max-margin model and the hand-weighted rule
baseline with a freshness boost."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError, DataError, NumericalError
from .base import RankModel, standardizer
from .boosting import _check_pairs

# candidate step fractions for the per-epoch line search
# Gradient magnitude varies over orders of magnitude with pair count, so the
# backtracking search needs a deep halving budget before giving up an epoch.
_MAX_BACKTRACKS = 60


class LinearRankModel(RankModel):
    """w dot standardized(x). Standardization is part of the model, which
    makes the ranking invariant to global feature rescaling."""

    kind = "ranksvm"

    def __init__(self, w, mean, std, **header):
        self.w = np.asarray(w, dtype=np.float64)
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)
        super().__init__(**header)

    def _scores(self, X: np.ndarray) -> np.ndarray:
        return ((X - self.mean) / self.std) @ self.w

    def params_to_dict(self) -> dict:
        return {"w": self.w.tolist(), "mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def params_from_dict(cls, d: dict, header: dict) -> "LinearRankModel":
        header.pop("kind", None)
        return cls(w=d["w"], mean=d["mean"], std=d["std"], **header)


def ranksvm_objective(w: np.ndarray, diffs: np.ndarray, cost: float) -> float:
    """0.5 ||w||^2 + cost * sum of max(0, 1 - w.(x_winner - x_loser))^2."""
    slack = np.maximum(0.0, 1.0 - diffs @ w)
    return 0.5 * float(w @ w) + cost * float(slack @ slack)


def train_ranksvm(
    X,
    pairs,
    cost: float = 1.0,
    epochs: int = 80,
    step: float = 0.1,
    seed: int = 0,
    schema_id: str = "core-v1",
    subset: str = "full",
) -> LinearRankModel:
    """Full-batch descent on the quadratically smoothed hinge objective.

    Each epoch backtracks the step (halving) until the objective improves, so
    it is non-increasing by construction; the unregularized gradient scales
    with the pair count, which makes any fixed step unusable across datasets.
    """
    if cost <= 0:
        raise ConfigError("cost must be > 0")
    if epochs < 1:
        raise ConfigError("epochs must be >= 1")
    if step <= 0:
        raise ConfigError("step must be > 0")
    X = np.asarray(X, dtype=np.float64)
    if len(X) == 0:
        raise DataError("training set is empty")
    pairs = _check_pairs(pairs, len(X))

    mean, std = standardizer(X)
    Xs = (X - mean) / std
    diffs = Xs[pairs[:, 0]] - Xs[pairs[:, 1]]

    w = np.zeros(X.shape[1])
    loss = ranksvm_objective(w, diffs, cost)
    curve = []
    for epoch in range(epochs):
        slack = np.maximum(0.0, 1.0 - diffs @ w)
        grad = w - 2.0 * cost * (slack @ diffs)
        base_step = step / (1.0 + 0.02 * epoch)
        frac = 1.0
        for _ in range(_MAX_BACKTRACKS):
            cand = w - base_step * frac * grad
            cand_loss = ranksvm_objective(cand, diffs, cost)
            if cand_loss < loss:
                w, loss = cand, cand_loss
                break
            frac *= 0.5
        if not math.isfinite(loss):
            raise NumericalError("ranksvm objective became non-finite", {"epoch": epoch, "loss": loss})
        curve.append(loss)
    return LinearRankModel(
        w=w,
        mean=mean,
        std=std,
        schema_id=schema_id,
        subset=subset,
        n_features=X.shape[1],
        seed=seed,
        hyper={"cost": cost, "epochs": epochs, "step": step},
        training={"loss_curve": curve},
    )


FRESH_THRESHOLD = math.exp(-1.0)  # freshness feature value at age 30 days

# Hand-set weights for the lightweight rule baseline. Historical engagement
# dominates, text relevance next, context signals trail.
DEFAULT_RULE_WEIGHTS = {
    "navboost_repin": 1.0,
    "navboost_click": 0.8,
    "bm25": 0.4,
    "tokenboost": 0.5,
    "categoryboost": 0.4,
    "freshness": 0.3,
    "social_score": 0.2,
    "locale_match": 0.2,
}
DEFAULT_FRESH_BOOST = 0.2


class RuleModel(RankModel):
    """Fixed linear combination plus a hard boost for pins younger than the
    freshness threshold. No training; weights come from configuration."""

    kind = "rule"

    def __init__(self, weights: dict, fresh_boost: float, subset_names, fresh_threshold: float = FRESH_THRESHOLD, **header):
        self.weights = {k: float(v) for k, v in weights.items()}
        self.fresh_boost = float(fresh_boost)
        self.fresh_threshold = float(fresh_threshold)
        self.subset_names = list(subset_names)
        unknown = [n for n in self.weights if n not in self.subset_names]
        if unknown:
            raise ConfigError(f"rule weights reference features outside the subset: {unknown}")
        if self.fresh_boost != 0.0 and "freshness" not in self.subset_names:
            raise ConfigError("fresh_boost needs the freshness feature in the subset")
        super().__init__(**header)
        self._wvec = np.array([self.weights.get(n, 0.0) for n in self.subset_names])
        self._fresh_idx = self.subset_names.index("freshness") if "freshness" in self.subset_names else None

    def _scores(self, X: np.ndarray) -> np.ndarray:
        out = X @ self._wvec
        if self._fresh_idx is not None and self.fresh_boost != 0.0:
            out = out + self.fresh_boost * (X[:, self._fresh_idx] > self.fresh_threshold)
        return out

    def params_to_dict(self) -> dict:
        return {
            "weights": {k: v for k, v in sorted(self.weights.items())},
            "fresh_boost": self.fresh_boost,
            "fresh_threshold": self.fresh_threshold,
            "subset_names": self.subset_names,
        }

    @classmethod
    def params_from_dict(cls, d: dict, header: dict) -> "RuleModel":
        header.pop("kind", None)
        return cls(
            weights=d["weights"],
            fresh_boost=d["fresh_boost"],
            fresh_threshold=d["fresh_threshold"],
            subset_names=d["subset_names"],
            **header,
        )


def make_rule_model(
    subset_names,
    weights: dict | None = None,
    fresh_boost: float = DEFAULT_FRESH_BOOST,
    schema_id: str = "core-v1",
    subset: str = "lightweight",
    seed: int = 0,
) -> RuleModel:
    if weights is None:
        weights = {k: v for k, v in DEFAULT_RULE_WEIGHTS.items() if k in subset_names}
    return RuleModel(
        weights=weights,
        fresh_boost=fresh_boost,
        subset_names=subset_names,
        schema_id=schema_id,
        subset=subset,
        n_features=len(subset_names),
        seed=seed,
        hyper={},
        training={},
    )
