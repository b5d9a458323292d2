"""Feature vector assembly.

FeatureContext bundles everything featurization may read: the corpus columns,
text statistics, the navboost table, and the schema. It never sees the planted
utility or any label, which keeps the feature surface honestly separated from
the simulation internals. Columns are computed per feature name, cached as
full-corpus arrays keyed by query/segment, and sliced per candidate set, so
funnel stages touching the same query pay the text scoring cost once.

Missing signals never become NaN: propensities fall back to the smoothing
prior with paired presence indicators (navboost_seen, tokenboost_seen), and
similarity helpers zero-guard empty vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ..synthlog.types import Corpus, Pin, Query, UserSegment
from .navboost import KEY_SEP, NavboostTable
from .schema import FeatureSchema, default_schema
from .similarity import (
    categoryboost,
    cosine,
    cosine_rows,
    embedding_sim,
    gender_match,
    gender_match_batch,
    topicboost,
)
from .text import CorpusStats, batch_bm25, batch_proximity_bm25, bm25, build_corpus_stats, proximity_bm25

FRESHNESS_SCALE_DAYS = 30.0


@dataclass
class FeatureVector:
    values: np.ndarray
    schema_id: str
    subset: str = "full"


def freshness(age_days) -> np.ndarray:
    return np.exp(-np.asarray(age_days, dtype=np.float64) / FRESHNESS_SCALE_DAYS)


class FeatureContext:
    def __init__(
        self,
        corpus: Corpus,
        stats: CorpusStats | None = None,
        navboost: NavboostTable | None = None,
        schema: FeatureSchema | None = None,
    ):
        self.corpus = corpus
        self.cols = corpus.columns()
        self.stats = stats if stats is not None else build_corpus_stats(corpus.pins)
        self.navboost = navboost if navboost is not None else NavboostTable()
        self.schema = schema if schema is not None else default_schema()
        self._cache: dict = {}

        self._nav_by_query: dict = {}
        for key, s in self.navboost.query_stats.items():
            qid, pid = key.split(KEY_SEP, 1)
            self._nav_by_query.setdefault(qid, []).append((pid, s))
        self._tok_by_token: dict = {}
        for key, s in self.navboost.token_stats.items():
            tok, pid = key.split(KEY_SEP, 1)
            self._tok_by_token.setdefault(tok, []).append((pid, s))

    # ---- full-corpus column builders (cached) ----

    def _cached(self, key, build):
        hit = self._cache.get(key)
        if hit is None:
            hit = build()
            self._cache[key] = hit
        return hit

    def _nav_columns(self, query_id: str) -> dict:
        def build():
            n = len(self.cols.pin_ids)
            prior = self.navboost.prior()
            out = {a: np.full(n, prior) for a in ("closeup", "repin", "longclick", "click")}
            out["seen"] = np.zeros(n)
            for pid, stats in self._nav_by_query.get(query_id, []):
                try:
                    i = self.corpus.pin_idx(pid)
                except KeyError:
                    continue
                out["seen"][i] = 1.0
                for action in ("closeup", "repin", "longclick", "click"):
                    out[action][i] = self.navboost._smooth(stats.get(action, 0), stats["imp"])
            return out

        return self._cached(("nav", query_id), build)

    def _tok_columns(self, query: Query) -> dict:
        def build():
            n = len(self.cols.pin_ids)
            tokens = sorted(set(query.tokens))
            if not tokens:
                return {"tokenboost": np.full(n, self.navboost.prior()), "seen": np.zeros(n)}
            acc = np.zeros(n)
            seen = np.zeros(n)
            for tok in tokens:
                col = np.full(n, self.navboost.prior())
                for pid, stats in self._tok_by_token.get(tok, []):
                    try:
                        i = self.corpus.pin_idx(pid)
                    except KeyError:
                        continue
                    col[i] = self.navboost._smooth(stats.get("pos", 0), stats["imp"])
                    seen[i] += 1.0
                acc += col
            return {"tokenboost": acc / len(tokens), "seen": seen / len(tokens)}

        return self._cached(("tok", query.query_id), build)

    def _column(self, name: str, query: Query, segment: UserSegment, cand: np.ndarray) -> np.ndarray:
        cols = self.cols
        if name == "bm25":
            return self._cached(("bm25", query.query_id), lambda: batch_bm25(query.tokens, self.stats))[cand]
        if name == "proximity_bm25":
            return self._cached(
                ("prox", query.query_id), lambda: batch_proximity_bm25(query.tokens, self.stats)
            )[cand]
        if name == "categoryboost":
            return self._cached(
                ("cat", query.query_id),
                lambda: np.maximum(0.0, cosine_rows(cols.category, query.category_dist)),
            )[cand]
        if name == "topicboost":
            return self._cached(
                ("topic", query.query_id),
                lambda: np.maximum(0.0, cosine_rows(cols.topic, query.topic_dist)),
            )[cand]
        if name == "embedding_sim":
            return self._cached(("emb", query.query_id), lambda: cosine_rows(cols.latent, query.latent_vec))[cand]
        if name.startswith("navboost_"):
            nav = self._nav_columns(query.query_id)
            return nav[name.removeprefix("navboost_")][cand]
        if name == "tokenboost":
            return self._tok_columns(query)["tokenboost"][cand]
        if name == "tokenboost_seen":
            return self._tok_columns(query)["seen"][cand]
        if name == "gender_match":
            return self._cached(
                ("gender", segment.segment_id), lambda: gender_match_batch(cols.male, segment.gender)
            )[cand]
        if name == "personal_category":
            return self._cached(
                ("pcat", segment.segment_id),
                lambda: np.maximum(0.0, cosine_rows(cols.category, segment.category_affinity)),
            )[cand]
        if name == "personal_embedding":
            return self._cached(
                ("pemb", segment.segment_id), lambda: cosine_rows(cols.latent, segment.latent_vec)
            )[cand]
        if name == "query_length":
            return np.full(len(cand), float(len(query.tokens)))
        if name == "query_frequency":
            return np.full(len(cand), float(query.frequency))
        if name == "query_male_score":
            return np.full(len(cand), float(query.male_oriented_score))
        if name == "social_score":
            return cols.social[cand]
        if name == "freshness":
            return self._cached(("fresh",), lambda: freshness(cols.age_days))[cand]
        if name == "locale_match":
            return self._cached(
                ("locale", segment.segment_id),
                lambda: np.array([1.0 if c == segment.country else 0.0 for c in cols.countries]),
            )[cand]
        if name == "diversity_penalty":
            return np.zeros(len(cand))
        raise DataError(f"no column builder for feature '{name}'")

    def matrix(self, query: Query, segment: UserSegment, pin_indices, subset: str = "full") -> np.ndarray:
        """Feature matrix for the candidate pins, restricted to the subset's
        columns. Only the named columns are computed."""
        cand = np.asarray(pin_indices, dtype=np.int64)
        names = self.schema.subset_names(subset)
        out = np.empty((len(cand), len(names)), dtype=np.float64)
        for k, name in enumerate(names):
            out[:, k] = self._column(name, query, segment, cand)
        if not np.all(np.isfinite(out)):
            bad = [names[k] for k in np.argwhere(~np.isfinite(out))[:, 1]]
            raise DataError(f"non-finite feature values in columns {sorted(set(bad))}")
        return out


def featurize(
    query: Query, segment: UserSegment, pin: Pin, ctx: FeatureContext, subset: str = "full"
) -> FeatureVector:
    """Featurize a single pin directly (the pin need not be in the corpus).

    Uses the same formulas as the batch path; the batch path is the fast lane
    for funnel stages, this one is the reference single-item lane.
    """
    nav = ctx.navboost
    tokens = sorted(set(query.tokens))
    if tokens:
        tokenboost_val = sum(nav.token_propensity(t, pin.pin_id) for t in tokens) / len(tokens)
        tokenboost_seen = sum(1.0 for t in tokens if nav.token_seen(t, pin.pin_id)) / len(tokens)
    else:
        tokenboost_val, tokenboost_seen = nav.prior(), 0.0

    values = {
        "bm25": bm25(query.tokens, pin.annotations, ctx.stats),
        "proximity_bm25": proximity_bm25(query.tokens, pin.annotations, ctx.stats),
        "categoryboost": categoryboost(query.category_dist, pin.category_dist),
        "topicboost": topicboost(query.topic_dist, pin.topic_dist),
        "embedding_sim": embedding_sim(query.latent_vec, pin.latent_vec),
        "navboost_closeup": nav.propensity(query.query_id, pin.pin_id, "closeup"),
        "navboost_repin": nav.propensity(query.query_id, pin.pin_id, "repin"),
        "navboost_longclick": nav.propensity(query.query_id, pin.pin_id, "longclick"),
        "navboost_click": nav.propensity(query.query_id, pin.pin_id, "click"),
        "navboost_seen": 1.0 if nav.seen(query.query_id, pin.pin_id) else 0.0,
        "tokenboost": tokenboost_val,
        "tokenboost_seen": tokenboost_seen,
        "gender_match": gender_match(pin.male_score, segment.gender),
        "personal_category": max(0.0, cosine(segment.category_affinity, pin.category_dist)),
        "personal_embedding": embedding_sim(segment.latent_vec, pin.latent_vec),
        "query_length": float(len(query.tokens)),
        "query_frequency": float(query.frequency),
        "query_male_score": float(query.male_oriented_score),
        "social_score": float(pin.social_score),
        "freshness": float(np.exp(-pin.age_days / FRESHNESS_SCALE_DAYS)),
        "locale_match": 1.0 if pin.linked_country == segment.country else 0.0,
        "diversity_penalty": 0.0,
    }
    names = ctx.schema.subset_names(subset)
    missing = [n for n in names if n not in values]
    if missing:
        raise DataError(f"no featurizer for schema features {missing}")
    vec = np.array([values[n] for n in names], dtype=np.float64)
    if not np.all(np.isfinite(vec)):
        raise DataError("non-finite feature value")
    return FeatureVector(values=vec, schema_id=ctx.schema.schema_id, subset=subset)
