"""Executes a cascade layout for one query: score, cut, score, cut, re-rank.

Ordering is deterministic everywhere. Score ties break by ascending pin id,
via the precomputed lexicographic rank, so reruns and serialized models give
byte-identical rankings.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DataError
from ..featurize import FeatureContext
from ..synthlog import Query, UserSegment
from .config import CascadeConfig, RerankPolicy, StageSpec


@dataclass
class StageResult:
    name: str
    n_in: int
    n_out: int
    elapsed_ms: float
    survivors: list  # (pin_id, score), best first


@dataclass
class CascadeResult:
    query_id: str
    segment_id: str
    stages: list = field(default_factory=list)

    @property
    def final(self) -> list:
        return self.stages[-1].survivors if self.stages else []

    def counts(self) -> list:
        return [(s.name, s.n_in, s.n_out) for s in self.stages]

    def total_ms(self) -> float:
        return sum(s.elapsed_ms for s in self.stages)


def _check_stage_model(spec: StageSpec, model, width: int) -> None:
    if model is None:
        if spec.kind != "rerank":
            raise ConfigError(f"stage {spec.name!r} has no model bound")
        return
    if model.subset != spec.subset:
        raise ConfigError(
            f"stage {spec.name!r} expects subset {spec.subset!r} "
            f"but the model was trained on {model.subset!r}"
        )
    if model.n_features != width:
        raise ConfigError(
            f"stage {spec.name!r}: model width {model.n_features} != subset width {width}"
        )


def _ordered(scores: np.ndarray, tie_rank: np.ndarray) -> np.ndarray:
    """Positions sorted by score descending, pin id ascending on ties."""
    return np.lexsort((tie_rank, -scores))


def _cut_count(scores_sorted: np.ndarray, spec: StageSpec, n: int) -> int:
    keep = min(spec.keep_top, n)
    if spec.adaptive is None:
        return keep
    above = int(np.count_nonzero(scores_sorted >= spec.adaptive.floor))
    return max(min(spec.adaptive.min_keep, keep), min(above, keep))


def score_stage(
    ctx: FeatureContext,
    spec: StageSpec,
    model,
    query: Query,
    segment: UserSegment,
    cand: np.ndarray,
) -> tuple:
    """Score one stage and cut. Returns (survivor indices, their scores)."""
    X = ctx.matrix(query, segment, cand, subset=spec.subset)
    scores = model.score_matrix(X)
    if not np.all(np.isfinite(scores)):
        raise DataError(f"stage {spec.name!r} produced non-finite scores")
    tie = ctx.corpus.columns().pid_rank[cand]
    order = _ordered(scores, tie)
    count = _cut_count(scores[order], spec, len(cand))
    kept = order[:count]
    return cand[kept], scores[kept]


def rerank_stage(
    ctx: FeatureContext,
    spec: StageSpec,
    model,
    query: Query,
    segment: UserSegment,
    cand: np.ndarray,
    incoming_scores: np.ndarray,
    policy: RerankPolicy,
) -> tuple:
    """Greedy list assembly with policy adjustments.

    The base score comes from the stage model (or passes through from the
    previous stage when no model is bound). Each pick adds span-scaled bumps
    for freshness and locale and subtracts the span-scaled penalty for the
    candidate's maximum embedding similarity to anything already placed. With
    an all-zero policy the result is exactly the incoming order and scores.

    Returns (indices, adjusted scores, max-similarity per pick).
    """
    names = ctx.schema.subset_names(spec.subset)
    X = ctx.matrix(query, segment, cand, subset=spec.subset)
    if model is not None:
        base = model.score_matrix(X)
        if not np.all(np.isfinite(base)):
            raise DataError(f"stage {spec.name!r} produced non-finite scores")
    else:
        if incoming_scores is None:
            raise ConfigError(f"stage {spec.name!r} has no model and no upstream scores")
        base = np.asarray(incoming_scores, dtype=np.float64)

    cols = ctx.corpus.columns()
    tie = cols.pid_rank[cand]
    n = len(cand)
    keep = min(spec.keep_top, n)
    span = float(base.max() - base.min()) if n else 0.0
    scale = span if span > 0.0 else 1.0

    def _policy_column(name: str, weight: float) -> np.ndarray:
        if name in names:
            return X[:, names.index(name)]
        if weight > 0.0:
            raise ConfigError(
                f"policy weights {name!r} but stage {spec.name!r} subset lacks that feature"
            )
        return np.zeros(n)

    fresh_col = _policy_column("freshness", policy.freshness_weight)
    locale_col = _policy_column("locale_match", policy.localness_weight)
    latent = cols.latent[cand]
    norms = np.linalg.norm(latent, axis=1)
    is_fresh = cols.age_days[cand] <= policy.fresh_age_days

    static_bonus = scale * (
        policy.freshness_weight * fresh_col + policy.localness_weight * locale_col
    )
    max_sim = np.zeros(n)
    remaining = np.ones(n, dtype=bool)
    picked_idx, picked_scores, picked_sim = [], [], []
    fresh_placed = 0
    for m in range(1, keep + 1):
        adjusted = base + static_bonus - scale * policy.diversity_weight * max_sim
        pool = remaining.copy()
        need_fresh = int(np.floor(policy.min_fresh_ratio * m))
        if fresh_placed < need_fresh and np.any(remaining & is_fresh):
            pool &= is_fresh
        # argmax over the pool, pin-id rank breaking ties
        cand_positions = np.flatnonzero(pool)
        order = np.lexsort((tie[cand_positions], -adjusted[cand_positions]))
        pick = cand_positions[order[0]]
        picked_idx.append(pick)
        picked_scores.append(float(adjusted[pick]))
        picked_sim.append(float(max_sim[pick]))
        remaining[pick] = False
        if is_fresh[pick]:
            fresh_placed += 1
        if m < keep and policy.diversity_weight > 0.0:
            denom = norms * norms[pick]
            with np.errstate(invalid="ignore", divide="ignore"):
                sims = np.where(denom > 0.0, latent @ latent[pick] / denom, 0.0)
            np.maximum(max_sim, np.clip(sims, -1.0, 1.0), out=max_sim)

    picks = np.asarray(picked_idx, dtype=np.int64)
    return cand[picks], np.asarray(picked_scores), np.asarray(picked_sim)


def run_cascade(
    ctx: FeatureContext,
    config: CascadeConfig,
    models: dict,
    query: Query,
    segment: UserSegment,
    candidates=None,
) -> CascadeResult:
    """Run the configured funnel for one query and segment.

    `models` maps stage name to a trained model; a rerank stage may map to
    None to pass the previous stage's scores through. `candidates` defaults
    to the whole corpus.
    """
    config.validate()
    corpus = ctx.corpus
    if candidates is None:
        cand = np.arange(len(corpus.pins), dtype=np.int64)
    else:
        cand = np.asarray(candidates, dtype=np.int64)
    if len(cand) == 0:
        raise DataError("candidate set is empty")

    result = CascadeResult(query_id=query.query_id, segment_id=segment.segment_id)
    scores = None
    for spec in config.stages:
        if spec.name not in models:
            raise ConfigError(f"no model bound for stage {spec.name!r}")
        model = models[spec.name]
        _check_stage_model(spec, model, ctx.schema.width(spec.subset))
        n_in = len(cand)
        t0 = time.perf_counter()
        if spec.kind == "rerank":
            cand, scores, _ = rerank_stage(
                ctx, spec, model, query, segment, cand, scores, config.policy
            )
        else:
            cand, scores = score_stage(ctx, spec, model, query, segment, cand)
        elapsed = (time.perf_counter() - t0) * 1000.0
        ids = [corpus.pins[i].pin_id for i in cand]
        result.stages.append(
            StageResult(
                name=spec.name,
                n_in=n_in,
                n_out=len(cand),
                elapsed_ms=elapsed,
                survivors=list(zip(ids, [float(s) for s in scores])),
            )
        )
    return result
