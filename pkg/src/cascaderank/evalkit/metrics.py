"""Ranked-list quality metrics: DCG and NDCG at a cutoff.

The discount log base defaults to 2, the common convention. A query whose
ideal DCG is zero has no defined NDCG and is excluded from averages; callers
get the exclusion count alongside the mean.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError

DEFAULT_CUTOFFS = (5, 10, 20)


def dcg(labels, p: int | None = None, log_base: float = 2.0) -> float:
    """Sum of label / log(rank + 1) over the first p ranks."""
    if p is not None and p < 1:
        raise ConfigError("cutoff p must be >= 1")
    if log_base <= 1.0:
        raise ConfigError("log_base must be > 1")
    vals = np.asarray(labels, dtype=np.float64)
    if p is not None:
        vals = vals[:p]
    if vals.size == 0:
        return 0.0
    ranks = np.arange(1, len(vals) + 1, dtype=np.float64)
    return float(np.sum(vals / (np.log(ranks + 1.0) / math.log(log_base))))


def idcg(labels, p: int | None = None, log_base: float = 2.0) -> float:
    ideal = np.sort(np.asarray(labels, dtype=np.float64))[::-1]
    return dcg(ideal, p, log_base)


def ndcg(labels, p: int | None = None, log_base: float = 2.0) -> float | None:
    """DCG over ideal DCG; None when the ideal is zero (nothing to gain)."""
    denom = idcg(labels, p, log_base)
    if denom == 0.0:
        return None
    return dcg(labels, p, log_base) / denom


def ndcg_from_ranking(ranked_ids, label_by_id: dict, p: int | None = None) -> float | None:
    """NDCG of a ranked id list against a label lookup.

    Gains clamp at zero: items labeled negative (hide-dominated) add nothing,
    and ids missing from the lookup count as zero. The ideal ordering draws
    from the full labeled pool, not only the ids that made the list, so a
    ranking is not rewarded for leaving good items out.
    """
    gains = [max(0.0, float(label_by_id.get(pid, 0.0))) for pid in ranked_ids]
    pool = [max(0.0, float(v)) for v in label_by_id.values()]
    denom = idcg(pool, p if p is not None else len(pool))
    if denom == 0.0:
        return None
    return dcg(gains, p) / denom


def mean_with_exclusions(values) -> tuple:
    """Mean over non-None entries; returns (mean or None, excluded count)."""
    vals = list(values)
    kept = [v for v in vals if v is not None]
    if not kept:
        return None, len(vals)
    return float(np.mean(kept)), len(vals) - len(kept)


def grouped_ndcg(scores, labels, group_slices, p: int, tie_rank=None) -> tuple:
    """Mean NDCG@p over row-range groups of one scored dataset.

    Rows within a group are ranked by score, ties broken by ascending
    tie_rank (row order when absent). Gains clamp at zero so hide-dominated
    labels cannot push NDCG negative. Returns (mean or None, excluded).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    per_group = []
    for start, stop in group_slices:
        s = scores[start:stop]
        tie = (
            np.arange(stop - start)
            if tie_rank is None
            else np.asarray(tie_rank[start:stop])
        )
        order = np.lexsort((tie, -s))
        gains = np.maximum(labels[start:stop][order], 0.0)
        denom = idcg(gains, p)
        per_group.append(None if denom == 0.0 else dcg(gains, p) / denom)
    return mean_with_exclusions(per_group)
