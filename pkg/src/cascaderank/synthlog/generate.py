"""Seeded synthetic corpus generation.

The generator plants a latent structure (category centroids, topic-owned token
sets) shared by pins, queries, and segments, then derives a per-(query, pin)
utility in [0, 1] from the hidden alignments. The utility drives the engagement
simulator and the synthetic judgments; it is stored next to the corpus for
evaluation and is never exposed to feature extraction.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..util import derived_seed
from .types import GENDERS, Corpus, Pin, Query, RelevanceJudgment, UserSegment

COUNTRIES = ("US", "GB", "DE", "FR", "BR", "JP")
COUNTRY_WEIGHTS = (0.40, 0.15, 0.15, 0.10, 0.10, 0.10)
GENDER_WEIGHTS = (0.6, 0.3, 0.1)

DEFAULT_DIMS = (8, 16, 32)  # categories, topics, latent width


def _unit_rows(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return m / norms


def _topic_token_table(n_topics: int, vocab_size: int) -> list[np.ndarray]:
    """Each topic owns an overlapping window of the vocabulary with Zipf-ish
    weights, so annotation overlap correlates with topic overlap."""
    span = max(4, (2 * vocab_size) // n_topics)
    tables = []
    for z in range(n_topics):
        start = (z * vocab_size) // n_topics
        idx = np.arange(start, start + span) % vocab_size
        weights = 1.0 / np.arange(1, span + 1)
        tables.append((idx, weights / weights.sum()))
    return tables


def _sample_tokens(rng, topic_dist, tables, vocab_size, n_tokens):
    out = []
    topics = rng.choice(len(tables), size=n_tokens, p=topic_dist)
    for z in topics:
        idx, weights = tables[z]
        out.append(int(idx[rng.choice(len(idx), p=weights)]))
    return [f"tok_{t:04d}" for t in out]


def planted_utility(query: Query, cat: np.ndarray, topic: np.ndarray, latent: np.ndarray) -> np.ndarray:
    """Utility in [0, 1] for one query against pin column matrices.

    Convex blend of three alignment terms, each already in [0, 1], then
    sharpened; the blend keeps the result inside [0, 1].
    """
    q_lat = query.latent_vec / max(np.linalg.norm(query.latent_vec), 1e-12)
    lat01 = (np.clip(_unit_rows(latent) @ q_lat, -1.0, 1.0) + 1.0) / 2.0

    def _cos_rows(m, v):
        nv = np.linalg.norm(v)
        nm = np.linalg.norm(m, axis=1)
        denom = np.maximum(nm * nv, 1e-12)
        return np.clip((m @ v) / denom, 0.0, 1.0)

    blend = 0.45 * lat01 + 0.35 * _cos_rows(topic, query.topic_dist) + 0.20 * _cos_rows(cat, query.category_dist)
    return np.clip(blend, 0.0, 1.0) ** 1.5


def generate_corpus(
    seed: int,
    n_pins: int,
    n_queries: int,
    n_segments: int,
    dims: tuple[int, int, int] = DEFAULT_DIMS,
    judgments_per_query: int = 40,
    raters: int = 3,
    with_utility: bool = True,
) -> Corpus:
    """Generate a corpus deterministically from the seed.

    Identical inputs give an identical corpus object; any change to the seed
    changes the sampled content.
    """
    if n_pins < 1 or n_queries < 1 or n_segments < 1:
        raise ConfigError("corpus sizes must all be >= 1")
    n_cat, n_topics, n_latent = dims
    if n_cat < 2 or n_topics < 2 or n_latent < 2:
        raise ConfigError("dims (categories, topics, latent) must all be >= 2")

    rng = np.random.default_rng(derived_seed(seed, "corpus"))
    vocab_size = max(120, 24 * n_topics)
    tables = _topic_token_table(n_topics, vocab_size)
    centroids = _unit_rows(rng.normal(size=(n_cat, n_latent)))

    def _latent_from(cat_dist):
        base = cat_dist @ centroids
        return base + 0.35 * rng.normal(size=n_latent)

    pins = []
    for i in range(n_pins):
        cat_dist = rng.dirichlet(np.full(n_cat, 0.3))
        topic_dist = rng.dirichlet(np.full(n_topics, 0.2))
        n_tokens = int(rng.integers(4, 13))
        pins.append(
            Pin(
                pin_id=f"pin_{i:06d}",
                annotations=_sample_tokens(rng, topic_dist, tables, vocab_size, n_tokens),
                category_dist=cat_dist,
                topic_dist=topic_dist,
                latent_vec=_latent_from(cat_dist),
                linked_country=str(rng.choice(COUNTRIES, p=COUNTRY_WEIGHTS)),
                age_days=float(np.clip(rng.exponential(60.0), 0.0, 730.0)),
                social_score=float(rng.beta(2.0, 5.0)),
                male_score=float(rng.beta(4.0, 4.0)),
            )
        )

    queries = []
    for i in range(n_queries):
        cat_dist = rng.dirichlet(np.full(n_cat, 0.3))
        topic_dist = rng.dirichlet(np.full(n_topics, 0.15))
        n_tokens = int(rng.integers(1, 5))
        queries.append(
            Query(
                query_id=f"q_{i:04d}",
                tokens=_sample_tokens(rng, topic_dist, tables, vocab_size, n_tokens),
                category_dist=cat_dist,
                topic_dist=topic_dist,
                latent_vec=_latent_from(cat_dist),
                frequency=int(np.clip(rng.zipf(2.0), 1, 1000)),
                male_oriented_score=float(rng.beta(2.0, 2.0)),
            )
        )

    segments = []
    for i in range(n_segments):
        affinity = rng.dirichlet(np.full(n_cat, 0.5))
        segments.append(
            UserSegment(
                segment_id=f"seg_{i:03d}",
                gender=str(rng.choice(GENDERS, p=GENDER_WEIGHTS)),
                country=str(rng.choice(COUNTRIES, p=COUNTRY_WEIGHTS)),
                category_affinity=affinity,
                latent_vec=affinity @ centroids + 0.35 * rng.normal(size=n_latent),
            )
        )

    corpus = Corpus(pins=pins, queries=queries, segments=segments, dims=dims, seed=seed)
    if with_utility:
        cols = corpus.columns()
        for q in queries:
            corpus.utility[q.query_id] = planted_utility(q, cols.category, cols.topic, cols.latent)
        corpus.judgments = simulate_judgments(corpus, judgments_per_query, raters, seed)
    return corpus


def simulate_judgments(corpus: Corpus, per_query: int, raters: int, seed: int) -> list[RelevanceJudgment]:
    """Noisy 3-level ratings of the planted utility.

    Each query gets `per_query` rated pins drawn across the utility range so
    the relevance source sees both good and bad pins; each rater reads the
    utility with independent noise and rounds into {0, 1, 2}.
    """
    judgments = []
    per_query = min(per_query, len(corpus.pins))
    for q in corpus.queries:
        rng = np.random.default_rng(derived_seed(seed, "judge", q.query_id))
        util = corpus.utility[q.query_id]
        order = np.argsort(-util, kind="stable")
        # stratified: half from the top of the utility range, half uniform
        n_top = per_query // 2
        top = order[:n_top]
        rest_pool = order[n_top:]
        rest = rng.choice(rest_pool, size=min(per_query - n_top, len(rest_pool)), replace=False)
        chosen = sorted(int(i) for i in np.concatenate([top, rest]))
        for i in chosen:
            noisy = util[i] * 2.0 + rng.normal(0.0, 0.35, size=raters)
            ratings = [int(r) for r in np.clip(np.rint(noisy), 0, 2)]
            judgments.append(RelevanceJudgment(query_id=q.query_id, pin_id=corpus.pins[i].pin_id, ratings=ratings))
    return judgments
