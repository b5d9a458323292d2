"""Feature extraction: text scores, similarities, propensity tables, schema."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cascaderank.errors import ConfigError, DataError
from cascaderank.featurize import (
    FeatureContext,
    NavboostTable,
    batch_bm25,
    batch_proximity_bm25,
    bm25,
    build_corpus_stats,
    build_navboost,
    categoryboost,
    cosine,
    cosine_rows,
    default_schema,
    featurize,
    freshness,
    gender_match,
    gender_match_batch,
    idf,
    proximity_bm25,
    window_pairs,
)
from cascaderank.featurize.navboost import KEY_SEP
from cascaderank.featurize.schema import LIGHTWEIGHT_SUBSET, RERANK_SUBSET
from cascaderank.featurize.vectorize import FRESHNESS_SCALE_DAYS
from cascaderank.synthlog import EngagementRecord, Pin


def make_pin(pid: str, tokens: list) -> Pin:
    return Pin(
        pin_id=pid,
        annotations=tokens,
        category_dist=np.array([0.5, 0.5]),
        topic_dist=np.array([0.5, 0.5]),
        latent_vec=np.array([1.0, 0.0]),
        linked_country="US",
        age_days=10.0,
        social_score=0.5,
        male_score=0.5,
    )


TINY_DOCS = [["a", "b", "a"], ["b", "c"], ["c"]]


@pytest.fixture(scope="module")
def stats():
    return build_corpus_stats([make_pin(f"p{i}", toks) for i, toks in enumerate(TINY_DOCS)])


class TestTextScores:
    DOCS = TINY_DOCS

    def test_idf_hand_value(self):
        assert idf(100, 10) == pytest.approx(math.log((100 - 10 + 0.5) / (10 + 0.5) + 1.0))

    def test_idf_decreasing_in_document_frequency(self):
        vals = [idf(1000, df) for df in (1, 10, 100, 1000)]
        assert vals == sorted(vals, reverse=True)
        assert vals[-1] > 0.0

    def test_unigram_hand_derivation(self, stats):
        """Three docs, query 'a' hits only doc0 (tf 2, len 3, avg len 2)."""
        k1, b = 1.2, 0.75
        expected_idf = math.log((3 - 1 + 0.5) / (1 + 0.5) + 1.0)
        norm = k1 * (1.0 - b + b * 3.0 / 2.0)
        expected = expected_idf * (2 * (k1 + 1.0)) / (2 + norm)
        assert bm25(["a"], self.DOCS[0], stats) == pytest.approx(expected)
        assert bm25(["a"], self.DOCS[1], stats) == 0.0

    def test_repeated_query_token_doubles_contribution(self, stats):
        assert bm25(["a", "a"], self.DOCS[0], stats) == pytest.approx(
            2 * bm25(["a"], self.DOCS[0], stats)
        )

    def test_window_pairs_enumeration(self):
        assert window_pairs(["a", "b", "c", "d"], window=2) == [
            ("a", "b"),
            ("a", "c"),
            ("b", "c"),
            ("b", "d"),
            ("c", "d"),
        ]

    def test_proximity_needs_a_bigram(self, stats):
        assert proximity_bm25(["a"], self.DOCS[0], stats) == 0.0

    def test_proximity_rewards_adjacency(self):
        """Same tokens, but only one doc keeps them within the window."""
        docs = [["x", "y", "f1", "f2"], ["x", "f1", "f2", "f3", "y"]]
        stats = build_corpus_stats([make_pin(f"p{i}", t) for i, t in enumerate(docs)])
        near = proximity_bm25(["x", "y"], docs[0], stats)
        far = proximity_bm25(["x", "y"], docs[1], stats)
        assert near > far == 0.0

    def test_batch_matches_scalar(self, corpus):
        stats = build_corpus_stats(corpus.pins)
        for query in corpus.queries[:3]:
            got = batch_bm25(query.tokens, stats)
            want = np.array([bm25(query.tokens, p.annotations, stats) for p in corpus.pins])
            np.testing.assert_allclose(got, want, atol=1e-12)
            got_p = batch_proximity_bm25(query.tokens, stats)
            want_p = np.array(
                [proximity_bm25(query.tokens, p.annotations, stats) for p in corpus.pins]
            )
            np.testing.assert_allclose(got_p, want_p, atol=1e-12)

    def test_empty_corpus_rejected(self):
        with pytest.raises(DataError):
            build_corpus_stats([])


class TestSimilarities:
    def test_category_overlap_hand_value(self):
        """Unit mass on one category vs an even split: cos = 1/sqrt(2)."""
        q = np.array([1.0, 0.0])
        p = np.array([0.5, 0.5])
        assert categoryboost(q, p) == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-12)

    def test_cosine_zero_guard(self):
        assert cosine(np.zeros(3), np.ones(3)) == 0.0

    def test_cosine_rows_matches_scalar(self):
        rng = np.random.default_rng(42)
        m = rng.normal(size=(20, 5))
        m[3] = 0.0
        v = rng.normal(size=5)
        got = cosine_rows(m, v)
        want = np.array([cosine(row, v) for row in m])
        np.testing.assert_allclose(got, want, atol=1e-12)

    @given(st.floats(min_value=0.0, max_value=1.0))
    def test_gender_match_bounds(self, m):
        for g in ("male", "female", "unknown"):
            assert 0.0 <= gender_match(m, g) <= 1.0

    def test_gender_match_values(self):
        assert gender_match(0.5, "male") == pytest.approx(1.0)
        assert gender_match(0.2, "male") == pytest.approx(0.4)
        assert gender_match(0.8, "female") == pytest.approx(0.4)
        assert gender_match(0.9, "unknown") == pytest.approx(0.2)
        assert gender_match(0.8, "male") == pytest.approx(1.0)

    def test_gender_match_batch_consistency(self):
        scores = np.linspace(0, 1, 11)
        for g in ("male", "female", "unknown"):
            np.testing.assert_allclose(
                gender_match_batch(scores, g), [gender_match(s, g) for s in scores]
            )


class TestNavboost:
    def test_prior_is_alpha_over_alpha_plus_beta(self):
        assert NavboostTable().prior() == pytest.approx(0.1)
        assert NavboostTable(alpha=2.0, beta=2.0).prior() == pytest.approx(0.5)

    def test_smoothed_propensity_hand_value(self):
        """10 impressions, all repins: (10 + 1) / (10 + 1 + 9) = 0.55."""
        t = NavboostTable(query_stats={f"q{KEY_SEP}p": {"imp": 10, "repin": 10}})
        assert t.propensity("q", "p", "repin") == pytest.approx(0.55)
        assert t.propensity("q", "p", "click") == pytest.approx(1.0 / 20.0)

    def test_unseen_key_falls_back_to_prior(self):
        t = NavboostTable()
        assert t.propensity("q", "nope", "repin") == pytest.approx(0.1)
        assert not t.seen("q", "nope")

    @given(st.integers(min_value=0, max_value=10_000))
    def test_propensity_strictly_inside_unit_interval(self, pos):
        t = NavboostTable(query_stats={f"q{KEY_SEP}p": {"imp": max(pos, 1), "repin": pos}})
        v = t.propensity("q", "p", "repin")
        assert 0.0 < v < 1.0

    def test_builder_counts_impressions_and_positives(self):
        recs = [
            EngagementRecord("q", "s", "p", {"repin": 1}, 0, 5.0),
            EngagementRecord("q", "s", "p", {}, 1, 5.0),
            EngagementRecord("q", "s", "p", {"hide": 1}, 2, 5.0),
        ]
        table = build_navboost(recs, {"q": ["tok_a", "tok_a", "tok_b"]})
        stats = table.query_stats[f"q{KEY_SEP}p"]
        assert stats == {"imp": 3, "repin": 1}
        # distinct tokens each see every impression; hide is not positive
        for tok in ("tok_a", "tok_b"):
            assert table.token_stats[f"{tok}{KEY_SEP}p"] == {"imp": 3, "pos": 1}

    def test_builder_rejects_unknown_query(self):
        recs = [EngagementRecord("ghost", "s", "p", {}, 0, 5.0)]
        with pytest.raises(DataError):
            build_navboost(recs, {"q": ["a"]})

    def test_round_trip(self):
        recs = [EngagementRecord("q", "s", "p", {"click": 2}, 0, 5.0)]
        table = build_navboost(recs, {"q": ["a"]})
        back = NavboostTable.from_dict(table.to_dict())
        assert back.query_stats == table.query_stats
        assert back.token_stats == table.token_stats
        assert back.prior() == table.prior()

    def test_bad_smoothing_rejected(self):
        with pytest.raises(ConfigError):
            NavboostTable(alpha=0.0)


class TestSchema:
    def test_subset_widths(self):
        schema = default_schema()
        assert schema.width("full") == 22
        assert schema.width("lightweight") == 8
        assert schema.width("rerank") == 6

    def test_lightweight_members(self):
        assert default_schema().subset_names("lightweight") == LIGHTWEIGHT_SUBSET
        assert LIGHTWEIGHT_SUBSET == (
            "bm25",
            "navboost_repin",
            "navboost_click",
            "tokenboost",
            "categoryboost",
            "freshness",
            "social_score",
            "locale_match",
        )

    def test_subsets_are_projections_of_full(self):
        schema = default_schema()
        for subset in ("lightweight", "rerank"):
            for name in schema.subset_names(subset):
                assert name in schema.names

    def test_unknown_subset_and_feature_rejected(self):
        schema = default_schema()
        with pytest.raises(ConfigError):
            schema.subset_names("gigantic")
        with pytest.raises(ConfigError):
            schema.index("not_a_feature")

    def test_round_trip(self):
        schema = default_schema()
        back = type(schema).from_dict(schema.to_dict())
        assert back.names == schema.names
        assert back.subset_names("rerank") == schema.subset_names("rerank")


class TestFeatureContext:
    def test_freshness_reference_points(self):
        assert freshness(0.0) == pytest.approx(1.0)
        assert freshness(FRESHNESS_SCALE_DAYS) == pytest.approx(math.exp(-1.0))

    def test_matrix_shapes(self, ctx, corpus):
        cand = np.arange(min(40, len(corpus.pins)))
        q, s = corpus.queries[0], corpus.segments[0]
        for subset, width in (("full", 22), ("lightweight", 8), ("rerank", 6)):
            m = ctx.matrix(q, s, cand, subset=subset)
            assert m.shape == (len(cand), width)
            assert np.all(np.isfinite(m))

    def test_diversity_penalty_column_is_zero_at_featurize_time(self, ctx, corpus):
        q, s = corpus.queries[0], corpus.segments[0]
        m = ctx.matrix(q, s, np.arange(20), subset="rerank")
        col = list(RERANK_SUBSET).index("diversity_penalty")
        np.testing.assert_array_equal(m[:, col], 0.0)

    def test_batch_rows_match_single_item_lane(self, ctx, corpus):
        """The cached batch path and the reference per-pin path agree."""
        rng = np.random.default_rng(42)
        cand = rng.choice(len(corpus.pins), size=12, replace=False)
        for q, s in [(corpus.queries[0], corpus.segments[0]), (corpus.queries[3], corpus.segments[1])]:
            m = ctx.matrix(q, s, cand, subset="full")
            for row, i in enumerate(cand):
                vec = featurize(q, s, corpus.pins[int(i)], ctx, subset="full")
                np.testing.assert_allclose(m[row], vec.values, atol=1e-10)

    def test_locale_match_is_binary(self, ctx, corpus):
        q, s = corpus.queries[1], corpus.segments[0]
        m = ctx.matrix(q, s, np.arange(len(corpus.pins)), subset="full")
        col = m[:, ctx.schema.index("locale_match")]
        assert set(np.unique(col)) <= {0.0, 1.0}

    def test_default_table_yields_prior_columns(self, corpus):
        """A context without a propensity table scores everything at prior."""
        bare = FeatureContext(corpus)
        q, s = corpus.queries[0], corpus.segments[0]
        m = bare.matrix(q, s, np.arange(10), subset="full")
        np.testing.assert_allclose(m[:, bare.schema.index("navboost_repin")], 0.1)
        np.testing.assert_allclose(m[:, bare.schema.index("navboost_seen")], 0.0)
