"""Synthetic corpus and engagement log generator."""

from __future__ import annotations

import numpy as np
import pytest
from scipy import stats

from cascaderank.errors import ConfigError, DataError
from cascaderank.synthlog import (
    ACTION_NAMES,
    NEGATIVE_ACTIONS,
    POSITIVE_ACTIONS,
    generate_corpus,
    read_corpus,
    read_judgments,
    read_log,
    simulate_log,
    write_corpus,
    write_log,
)
from cascaderank.util import write_jsonl


class TestCorpusGeneration:
    def test_same_seed_same_corpus(self):
        a = generate_corpus(3, n_pins=40, n_queries=5, n_segments=2)
        b = generate_corpus(3, n_pins=40, n_queries=5, n_segments=2)
        assert [p.pin_id for p in a.pins] == [p.pin_id for p in b.pins]
        assert [p.annotations for p in a.pins] == [p.annotations for p in b.pins]
        np.testing.assert_array_equal(a.columns().latent, b.columns().latent)
        for q in a.queries:
            np.testing.assert_array_equal(a.utility[q.query_id], b.utility[q.query_id])

    def test_different_seed_different_content(self):
        a = generate_corpus(3, n_pins=40, n_queries=5, n_segments=2)
        b = generate_corpus(4, n_pins=40, n_queries=5, n_segments=2)
        assert [p.annotations for p in a.pins] != [p.annotations for p in b.pins]

    def test_utility_in_unit_interval(self, corpus):
        for q in corpus.queries:
            util = corpus.utility[q.query_id]
            assert util.shape == (len(corpus.pins),)
            assert np.all(util >= 0.0) and np.all(util <= 1.0)

    def test_judgment_ratings_are_valid(self, corpus):
        assert corpus.judgments
        for j in corpus.judgments:
            assert j.ratings and all(r in (0, 1, 2) for r in j.ratings)

    def test_rejects_degenerate_sizes(self):
        with pytest.raises(ConfigError):
            generate_corpus(0, n_pins=0, n_queries=5, n_segments=2)


class TestCorpusIO:
    def test_round_trip(self, corpus, tmp_path):
        write_corpus(corpus, tmp_path)
        back = read_corpus(tmp_path, need_utility=True)
        assert [p.pin_id for p in back.pins] == [p.pin_id for p in corpus.pins]
        assert [q.query_id for q in back.queries] == [q.query_id for q in corpus.queries]
        assert [s.segment_id for s in back.segments] == [s.segment_id for s in corpus.segments]
        for q in corpus.queries:
            np.testing.assert_allclose(back.utility[q.query_id], corpus.utility[q.query_id])
        assert len(back.judgments) == len(corpus.judgments)

    def test_written_files_are_byte_stable(self, corpus, tmp_path):
        d1, d2 = tmp_path / "a", tmp_path / "b"
        write_corpus(corpus, d1)
        write_corpus(corpus, d2)
        for name in ("pins.jsonl", "queries.jsonl", "segments.jsonl"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()


class TestLogSimulation:
    def test_deterministic(self, corpus):
        a = simulate_log(corpus, 50, 1.0, seed=9)
        b = simulate_log(corpus, 50, 1.0, seed=9)
        assert a == b

    def test_one_record_per_impression(self, corpus):
        records = simulate_log(corpus, 30, 1.0, seed=9, page_size=20)
        assert len(records) == 30 * 20
        for r in records:
            assert 0 <= r.position < 20
            for action in r.action_counts:
                assert action in ACTION_NAMES

    def test_hides_never_coincide_with_engagement(self, corpus):
        for r in simulate_log(corpus, 200, 1.0, seed=9):
            if r.action_counts.get("hide"):
                assert not any(r.action_counts.get(a) for a in POSITIVE_ACTIONS)

    def test_position_bias_decays_engagement(self, corpus):
        """With bias 1 the engagement rate must drop from the first to the
        last slot; slotwise noise makes adjacent comparisons unstable, so
        compare the top and bottom halves of the page."""
        records = simulate_log(corpus, 3000, 1.0, seed=9, page_size=20)
        engaged = np.zeros(20)
        shown = np.zeros(20)
        for r in records:
            shown[r.position] += 1
            if any(r.action_counts.get(a) for a in POSITIVE_ACTIONS):
                engaged[r.position] += 1
        rate = engaged / shown
        assert rate[:10].mean() > rate[10:].mean() * 1.3

    def test_zero_bias_rate_is_position_independent(self, corpus):
        """Chi-square on the position x engaged table: with bias 0 the
        engagement rate carries no position signal."""
        records = simulate_log(corpus, 3000, 0.0, seed=9, page_size=20)
        table = np.zeros((20, 2))
        for r in records:
            hit = any(r.action_counts.get(a) for a in POSITIVE_ACTIONS)
            table[r.position, int(hit)] += 1
        _, p_value, _, _ = stats.chi2_contingency(table)
        assert p_value > 0.01

    def test_rejects_negative_bias(self, corpus):
        with pytest.raises(ConfigError):
            simulate_log(corpus, 10, -0.5, seed=9)


class TestLogIO:
    def test_round_trip(self, corpus, tmp_path):
        records = simulate_log(corpus, 20, 1.0, seed=9)
        path = tmp_path / "log.jsonl"
        n = write_log(path, records)
        assert n == len(records)
        assert read_log(path) == records

    def test_unknown_action_is_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        write_jsonl(
            path,
            [
                {
                    "query_id": "q",
                    "segment_id": "s",
                    "pin_id": "p",
                    "action_counts": {"teleport": 1},
                    "position": 0,
                    "age_days_at_impression": 5.0,
                }
            ],
        )
        with pytest.raises(DataError):
            read_log(path)

    def test_judgments_round_trip(self, corpus, tmp_path):
        write_corpus(corpus, tmp_path)
        back = read_judgments(tmp_path / "judgments.jsonl")
        assert [(j.query_id, j.pin_id, j.ratings) for j in back] == [
            (j.query_id, j.pin_id, j.ratings) for j in corpus.judgments
        ]


def test_action_name_partition():
    assert set(ACTION_NAMES) == set(POSITIVE_ACTIONS) | set(NEGATIVE_ACTIONS)
    assert not set(POSITIVE_ACTIONS) & set(NEGATIVE_ACTIONS)
