"""Featurization: text scores, similarities, propensity tables, schema."""

from .navboost import DEFAULT_ALPHA, DEFAULT_BETA, NavboostTable, build_navboost
from .schema import (
    FEATURE_NAMES,
    LIGHTWEIGHT_SUBSET,
    RERANK_SUBSET,
    SCHEMA_ID,
    FeatureSchema,
    check_width,
    default_schema,
)
from .similarity import (
    categoryboost,
    cosine,
    cosine_rows,
    embedding_sim,
    gender_match,
    gender_match_batch,
    topicboost,
)
from .text import (
    CorpusStats,
    batch_bm25,
    batch_proximity_bm25,
    bm25,
    build_corpus_stats,
    idf,
    proximity_bm25,
    window_pairs,
)
from .vectorize import FRESHNESS_SCALE_DAYS, FeatureContext, FeatureVector, featurize, freshness

__all__ = [
    "DEFAULT_ALPHA",
    "DEFAULT_BETA",
    "FEATURE_NAMES",
    "FRESHNESS_SCALE_DAYS",
    "FeatureContext",
    "FeatureSchema",
    "FeatureVector",
    "LIGHTWEIGHT_SUBSET",
    "NavboostTable",
    "RERANK_SUBSET",
    "SCHEMA_ID",
    "CorpusStats",
    "batch_bm25",
    "batch_proximity_bm25",
    "bm25",
    "build_corpus_stats",
    "build_navboost",
    "categoryboost",
    "check_width",
    "cosine",
    "cosine_rows",
    "default_schema",
    "embedding_sim",
    "featurize",
    "freshness",
    "gender_match",
    "gender_match_batch",
    "idf",
    "proximity_bm25",
    "topicboost",
    "window_pairs",
]
