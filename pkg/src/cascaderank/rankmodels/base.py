"""Shared model contract: every ranker trains to the same interface, scores
feature matrices, serializes to versioned JSON, and ranks with a fixed
deterministic tie-break (score descending, pin id ascending)."""

from __future__ import annotations

import numpy as np

from ..errors import DataError, NumericalError

MODEL_KINDS = ("gbdt", "gbrt", "ranksvm", "ranknet", "dnn", "cnn", "rule")


class RankModel:
    """Base class. Subclasses set `kind` and implement `_scores` plus the
    param (de)serialization hooks."""

    kind = "?"

    def __init__(self, schema_id: str, subset: str, n_features: int, seed: int, hyper: dict, training: dict):
        self.schema_id = schema_id
        self.subset = subset
        self.n_features = int(n_features)
        self.seed = int(seed)
        self.hyper = dict(hyper)
        self.training = dict(training)

    def _check_matrix(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise DataError("expected a 2-D feature matrix")
        if X.shape[1] != self.n_features:
            raise DataError(
                f"feature vector width {X.shape[1]} does not match model "
                f"(kind={self.kind}, schema={self.schema_id}, subset={self.subset}, width={self.n_features})"
            )
        if not np.all(np.isfinite(X)):
            raise DataError("feature matrix contains non-finite values")
        return X

    def score_matrix(self, X) -> np.ndarray:
        return self._scores(self._check_matrix(X))

    def score(self, x) -> float:
        return float(self.score_matrix(np.asarray(x, dtype=np.float64)[None, :])[0])

    def _scores(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # serialization hooks
    def params_to_dict(self) -> dict:
        raise NotImplementedError

    @classmethod
    def params_from_dict(cls, d: dict, header: dict) -> "RankModel":
        raise NotImplementedError


def argsort_ranking(scores: np.ndarray, tie_rank: np.ndarray) -> np.ndarray:
    """Indices ordered by score descending; equal scores ordered by the given
    ascending tie rank (pin id order)."""
    return np.lexsort((tie_rank, -scores))


def tie_ranks(pin_ids) -> np.ndarray:
    """Rank of each pin id under ascending lexicographic order."""
    order = sorted(range(len(pin_ids)), key=lambda i: pin_ids[i])
    ranks = np.empty(len(pin_ids), dtype=np.int64)
    for r, i in enumerate(order):
        ranks[i] = r
    return ranks


def rank_candidates(model: RankModel, pin_ids, X, tie_rank=None) -> list:
    """Score and order candidates; returns [(pin_id, score)] best first."""
    scores = model.score_matrix(X)
    if not np.all(np.isfinite(scores)):
        raise NumericalError(f"{model.kind} produced non-finite scores", {"kind": model.kind})
    if tie_rank is None:
        tie_rank = tie_ranks(pin_ids)
    order = argsort_ranking(scores, np.asarray(tie_rank))
    return [(pin_ids[int(i)], float(scores[int(i)])) for i in order]


def standardizer(X: np.ndarray):
    """Column means and stds for internal feature scaling; constant columns
    get std 1 so they map to exactly zero."""
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std < 1e-12] = 1.0
    return mean, std
