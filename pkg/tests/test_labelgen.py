"""Label generation: weights, aggregation, de-bias, pruning, pairs, splits."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cascaderank.errors import ConfigError, DataError
from cascaderank.labelgen import (
    LabelConfig,
    LabeledInstance,
    PreferencePair,
    aggregate_label,
    apply_ordinals,
    average_judgments,
    build_instances,
    default_weights,
    derive_cuts,
    discretize,
    extract_pairs,
    group_instances,
    normalize_label,
    ordered_index_pairs,
    prune_groups,
    split_dataset,
    split_groups,
    subsample_pairs,
)
from cascaderank.labelgen.split import DEFAULT_FRACTIONS, SPLIT_NAMES
from cascaderank.synthlog import EngagementRecord, RelevanceJudgment


def record(qid="q0", sid="s0", pid="p0", counts=None, position=0, age=10.0):
    return EngagementRecord(
        query_id=qid,
        segment_id=sid,
        pin_id=pid,
        action_counts=counts or {},
        position=position,
        age_days_at_impression=age,
    )


class TestActionWeights:
    def test_reference_volume_table(self):
        """Volumes 50/20/15/10/5 give weights 0.2, 0.5, 2/3, 1.0, -2.0."""
        w = default_weights({"closeup": 50, "repin": 20, "longclick": 15, "click": 10, "hide": 5})
        assert w["closeup"] == pytest.approx(0.2)
        assert w["repin"] == pytest.approx(0.5)
        assert w["longclick"] == pytest.approx(2.0 / 3.0)
        assert w["click"] == pytest.approx(1.0)
        assert w["hide"] == pytest.approx(-2.0)

    def test_rarest_positive_action_gets_unit_weight(self):
        w = default_weights({"click": 10, "repin": 20})
        assert w == {"click": 1.0, "repin": 0.5}

    def test_negative_actions_flip_sign(self):
        w = default_weights({"click": 4, "hide": 2})
        assert w["hide"] == -2.0

    def test_all_negative_volumes_rejected(self):
        with pytest.raises(ConfigError):
            default_weights({"hide": 5})


class TestAggregateLabel:
    WEIGHTS = {"click": 1.0, "repin": 0.5, "hide": -2.0}

    def test_weighted_count_sum(self):
        recs = [record(counts={"click": 2, "repin": 1, "hide": 1})]
        assert aggregate_label(recs, self.WEIGHTS) == pytest.approx(0.5)

    def test_linear_in_counts(self):
        """Doubling every count doubles the label."""
        base = [record(counts={"click": 1, "repin": 2})]
        doubled = [record(counts={"click": 2, "repin": 4})]
        assert aggregate_label(doubled, self.WEIGHTS) == pytest.approx(
            2 * aggregate_label(base, self.WEIGHTS)
        )

    def test_additive_across_records(self):
        a = [record(counts={"click": 1})]
        b = [record(counts={"repin": 1}, position=5)]
        assert aggregate_label(a + b, self.WEIGHTS) == pytest.approx(
            aggregate_label(a, self.WEIGHTS) + aggregate_label(b, self.WEIGHTS)
        )

    def test_mixed_keys_rejected(self):
        recs = [record(pid="p0", counts={"click": 1}), record(pid="p1", counts={"click": 1})]
        with pytest.raises(DataError):
            aggregate_label(recs, self.WEIGHTS)

    def test_unknown_action_rejected(self):
        with pytest.raises(DataError):
            aggregate_label([record(counts={"warp": 1})], self.WEIGHTS)


class TestNormalizeLabel:
    CFG = LabelConfig()  # tau 30, lambda_pos 0.05

    def test_multiplier_at_tau_and_slot_zero_is_two(self):
        """age term 1/(ln 1 + 1) = 1 plus position term e^0 = 1."""
        assert normalize_label(1.0, 30.0, 0, self.CFG) == pytest.approx(2.0)

    def test_age_term_halves_at_tau_times_e(self):
        expected = 1.0 / (math.log(math.e) + 1.0) + 1.0
        assert normalize_label(1.0, 30.0 * math.e, 0, self.CFG) == pytest.approx(expected)
        assert expected == pytest.approx(1.5)

    def test_age_clamped_below_tau(self):
        fresh = normalize_label(1.0, 0.0, 3, self.CFG)
        assert fresh == pytest.approx(normalize_label(1.0, 30.0, 3, self.CFG))

    @given(st.floats(min_value=30.0, max_value=700.0), st.floats(min_value=0.5, max_value=700.0))
    def test_multiplier_decreasing_in_age_beyond_tau(self, age, bump):
        older = normalize_label(1.0, age + bump, 0, self.CFG)
        assert older < normalize_label(1.0, age, 0, self.CFG)

    @given(st.integers(min_value=0, max_value=49))
    def test_multiplier_increasing_in_position(self, pos):
        """A positive position exponent compensates bad slots upward."""
        assert normalize_label(1.0, 10.0, pos + 1, self.CFG) > normalize_label(
            1.0, 10.0, pos, self.CFG
        )

    def test_sign_preserved_for_negative_raw(self):
        assert normalize_label(-1.0, 10.0, 0, self.CFG) < 0

    def test_negative_age_rejected(self):
        with pytest.raises(DataError):
            normalize_label(1.0, -1.0, 0, self.CFG)


class TestBuildInstances:
    def test_one_instance_per_triple(self):
        recs = [
            record(pid="a", counts={"click": 1}),
            record(pid="a", counts={"repin": 1}, position=4),
            record(pid="b", counts={}),
        ]
        instances = build_instances(recs, LabelConfig())
        assert sorted(i.pin_id for i in instances) == ["a", "b"]

    def test_multiplier_uses_mean_age_and_position(self):
        cfg = LabelConfig()
        recs = [
            record(pid="a", counts={"click": 1}, position=0, age=40.0),
            record(pid="a", counts={"click": 1}, position=10, age=80.0),
        ]
        (inst,) = build_instances(recs, cfg)
        raw = 2 * cfg.action_weights["click"]
        assert inst.label == pytest.approx(normalize_label(raw, 60.0, 5.0, cfg))


@st.composite
def label_groups(draw):
    """A handful of (query, segment) groups with signed labels."""
    n_groups = draw(st.integers(min_value=1, max_value=5))
    groups = {}
    for g in range(n_groups):
        labels = draw(
            st.lists(
                st.floats(min_value=-5, max_value=5, allow_nan=False),
                min_size=1,
                max_size=40,
            )
        )
        key = (f"q{g}", "s0")
        groups[key] = [
            LabeledInstance(query_id=key[0], segment_id=key[1], pin_id=f"p{i}", label=lab)
            for i, lab in enumerate(labels)
        ]
    return groups


class TestPruneGroups:
    @given(label_groups(), st.integers(min_value=1, max_value=5))
    def test_invariants(self, groups, neg_cap):
        cfg = LabelConfig(neg_cap=neg_cap)
        pruned = prune_groups(groups, cfg, seed=3)
        for key, members in pruned.items():
            positives = [m for m in members if m.label > 0]
            negatives = [m for m in members if m.label <= 0]
            assert positives, "a surviving group must keep a positive"
            assert len(negatives) <= neg_cap
            # positives are never dropped
            assert len(positives) == sum(1 for m in groups[key] if m.label > 0)
        for key, members in groups.items():
            if any(m.label > 0 for m in members):
                assert key in pruned

    def test_group_pruning_is_independent_of_other_groups(self):
        rng = np.random.default_rng(0)
        g1 = [
            LabeledInstance("q1", "s0", f"p{i}", lab)
            for i, lab in enumerate(rng.normal(size=60))
        ] + [LabeledInstance("q1", "s0", "pos", 1.0)]
        g2 = [LabeledInstance("q2", "s0", "x", 0.5)]
        cfg = LabelConfig(neg_cap=5)
        alone = prune_groups({("q1", "s0"): g1}, cfg, seed=9)
        together = prune_groups({("q1", "s0"): g1, ("q2", "s0"): g2}, cfg, seed=9)
        assert [i.pin_id for i in alone[("q1", "s0")]] == [
            i.pin_id for i in together[("q1", "s0")]
        ]

    def test_deterministic(self):
        groups = {
            ("q", "s"): [LabeledInstance("q", "s", f"p{i}", -1.0) for i in range(50)]
            + [LabeledInstance("q", "s", "w", 2.0)]
        }
        cfg = LabelConfig(neg_cap=7)
        a = prune_groups(groups, cfg, seed=5)
        b = prune_groups(groups, cfg, seed=5)
        assert [i.pin_id for i in a[("q", "s")]] == [i.pin_id for i in b[("q", "s")]]


class TestRelevanceAveraging:
    def test_mean_of_ratings(self):
        j = RelevanceJudgment(query_id="q", pin_id="p", ratings=(0, 1, 2))
        inst = average_judgments(j)
        assert inst.label == pytest.approx(1.0)
        assert inst.segment_id == "all"
        assert inst.source == "relevance"

    def test_rating_outside_scale_rejected(self):
        with pytest.raises(DataError):
            average_judgments(RelevanceJudgment(query_id="q", pin_id="p", ratings=(0, 3)))


class TestDiscretize:
    CUTS = (1.0, 2.0, 3.0)

    @pytest.mark.parametrize(
        "label,expected",
        [(-4.0, 1), (1.0, 1), (1.5, 2), (2.0, 2), (2.5, 3), (3.0, 3), (3.1, 4), (50.0, 4)],
    )
    def test_interval_mapping(self, label, expected):
        assert discretize(label, self.CUTS) == expected

    @given(
        st.floats(min_value=-10, max_value=10, allow_nan=False),
        st.floats(min_value=-10, max_value=10, allow_nan=False),
    )
    def test_monotone_in_label(self, a, b):
        lo, hi = sorted((a, b))
        assert discretize(lo, self.CUTS) <= discretize(hi, self.CUTS)

    def test_unordered_cuts_rejected(self):
        with pytest.raises(ConfigError):
            discretize(1.0, (2.0, 2.0, 3.0))

    def test_derive_cuts_are_positive_quartiles(self):
        labels = [float(x) for x in range(1, 101)] + [-5.0] * 30
        instances = [LabeledInstance("q", "s", f"p{i}", lab) for i, lab in enumerate(labels)]
        cuts = derive_cuts(instances)
        positives = np.array([x for x in labels if x > 0])
        np.testing.assert_allclose(cuts, np.quantile(positives, [0.25, 0.5, 0.75]))

    def test_derive_cuts_stay_ascending_when_quartiles_collapse(self):
        instances = [LabeledInstance("q", "s", f"p{i}", 2.0) for i in range(10)]
        c1, c2, c3 = derive_cuts(instances)
        assert c1 < c2 < c3

    def test_apply_ordinals_fills_every_instance(self):
        instances = [LabeledInstance("q", "s", f"p{i}", float(i)) for i in range(6)]
        apply_ordinals(instances, self.CUTS)
        assert [i.ordinal_label for i in instances] == [1, 1, 2, 3, 4, 4]


class TestPreferencePairs:
    def test_exact_enumeration(self):
        assert ordered_index_pairs([3.0, 1.0, 2.0]) == [(0, 1), (0, 2), (2, 1)]

    def test_ties_produce_no_pair(self):
        assert ordered_index_pairs([1.0, 1.0]) == []

    @given(st.lists(st.integers(min_value=0, max_value=3), min_size=2, max_size=12))
    def test_count_matches_strict_orderings(self, labels):
        expected = sum(
            1 for i in range(len(labels)) for j in range(len(labels)) if labels[i] > labels[j]
        )
        assert len(ordered_index_pairs(labels)) == expected

    def test_subsample_caps_and_preserves_order(self):
        pairs = ordered_index_pairs(list(range(30)))
        sub = subsample_pairs(pairs, 50, 2, "q", "s")
        assert len(sub) == 50
        assert sub == sorted(sub, key=pairs.index)
        assert set(sub) <= set(pairs)

    def test_subsample_below_cap_is_identity(self):
        pairs = [(0, 1), (2, 1)]
        assert subsample_pairs(pairs, 100, 2) == pairs

    def test_extracted_pairs_prefer_higher_label(self):
        group = [
            LabeledInstance("q", "s", "low", 0.5),
            LabeledInstance("q", "s", "high", 2.0),
            LabeledInstance("q", "s", "mid", 1.0),
        ]
        pairs = extract_pairs(group, max_pairs_per_group=100, seed=1)
        by_pin = {i.pin_id: i.label for i in group}
        assert pairs
        for p in pairs:
            assert isinstance(p, PreferencePair)
            assert by_pin[p.winner_pin] > by_pin[p.loser_pin]


class TestGroupSplit:
    KEYS = [(f"q{i}", f"s{i % 3}") for i in range(40)]

    def test_largest_remainder_counts(self):
        assignment = split_groups(self.KEYS, DEFAULT_FRACTIONS, seed=0)
        counts = {name: 0 for name in SPLIT_NAMES}
        for v in assignment.values():
            counts[v] += 1
        assert counts == {"train": 28, "test": 8, "valid": 4}

    @given(st.integers(min_value=1, max_value=60), st.integers(min_value=0, max_value=3))
    def test_every_group_lands_in_exactly_one_bucket(self, n, seed):
        keys = [(f"q{i}", "s") for i in range(n)]
        assignment = split_groups(keys, DEFAULT_FRACTIONS, seed)
        assert set(assignment) == set(keys)
        assert set(assignment.values()) <= set(SPLIT_NAMES)
        counts = [sum(1 for v in assignment.values() if v == name) for name in SPLIT_NAMES]
        for count, frac in zip(counts, DEFAULT_FRACTIONS):
            assert abs(count - frac * n) < 1.0 + 1e-9

    def test_split_dataset_keeps_groups_whole(self):
        instances = [
            LabeledInstance(q, s, f"p{i}", 1.0) for q, s in self.KEYS for i in range(3)
        ]
        train, test, valid, assignment = split_dataset(instances, DEFAULT_FRACTIONS, seed=1)
        assert len(train) + len(test) + len(valid) == len(instances)
        seen = {}
        for name, bucket in zip(SPLIT_NAMES, (train, test, valid)):
            for inst in bucket:
                assert assignment[inst.group_key] == name
                assert seen.setdefault(inst.group_key, name) == name

    def test_deterministic(self):
        a = split_groups(self.KEYS, DEFAULT_FRACTIONS, seed=11)
        b = split_groups(self.KEYS, DEFAULT_FRACTIONS, seed=11)
        assert a == b

    def test_bad_fractions_rejected(self):
        with pytest.raises(ConfigError):
            split_groups(self.KEYS, (0.5, 0.5, 0.5), seed=0)


class TestLabelConfig:
    def test_hide_weight_must_be_negative(self):
        with pytest.raises(ConfigError):
            LabelConfig(action_weights={"click": 1.0, "hide": 0.5}).validate()

    def test_from_dict_accepts_volumes(self):
        cfg = LabelConfig.from_dict({"action_volumes": {"click": 10, "repin": 20, "hide": 5}})
        assert cfg.action_weights["repin"] == pytest.approx(0.5)
        assert cfg.action_weights["hide"] == pytest.approx(-2.0)

    def test_round_trip(self):
        cfg = LabelConfig.from_dict({"tau": 15.0, "neg_cap": 7, "discretize_cuts": [0.1, 0.5, 1.2]})
        assert LabelConfig.from_dict(cfg.to_dict()) == cfg


class TestEndToEndArtifacts:
    """Sanity of the fixture pipeline's label artifacts."""

    def test_cuts_strictly_ascending(self, label_arts):
        c1, c2, c3 = label_arts.cuts
        assert c1 < c2 < c3

    def test_engagement_ordinals_assigned(self, label_arts):
        for split in SPLIT_NAMES:
            for inst in label_arts.engagement[split]:
                assert inst.ordinal_label in (1, 2, 3, 4)

    def test_relevance_groups_are_segment_free(self, label_arts):
        for split in SPLIT_NAMES:
            for inst in label_arts.relevance[split]:
                assert inst.segment_id == "all"
                assert 0.0 <= inst.label <= 2.0

    def test_no_group_spans_splits(self, label_arts):
        for source in ("engagement", "relevance"):
            seen = {}
            for split in SPLIT_NAMES:
                for key in label_arts.group_keys(source, split):
                    assert seen.setdefault(key, split) == split
