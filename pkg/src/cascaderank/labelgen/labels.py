"""Engagement label generation: aggregate, de-bias, prune, discretize.

One labeled instance per (query, segment, pin). The raw label is the weighted
sum of action counts; the de-bias multiplier compensates the position and age
at impression time so items engaged despite a bad slot or old age score
higher. Normalization runs before pruning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DataError
from ..util import derived_seed
from ..synthlog.types import EngagementRecord, RelevanceJudgment
from .config import LabelConfig

ENGAGEMENT = "engagement"
RELEVANCE = "relevance"


@dataclass
class LabeledInstance:
    query_id: str
    segment_id: str
    pin_id: str
    label: float
    ordinal_label: int | None = None
    source: str = ENGAGEMENT

    @property
    def group_key(self) -> tuple:
        return (self.query_id, self.segment_id)

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "segment_id": self.segment_id,
            "pin_id": self.pin_id,
            "label": float(self.label),
            "ordinal_label": None if self.ordinal_label is None else int(self.ordinal_label),
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LabeledInstance":
        ordinal = d.get("ordinal_label")
        return cls(
            query_id=d["query_id"],
            segment_id=d["segment_id"],
            pin_id=d["pin_id"],
            label=float(d["label"]),
            ordinal_label=None if ordinal is None else int(ordinal),
            source=d.get("source", ENGAGEMENT),
        )


def aggregate_label(records: list[EngagementRecord], weights: dict) -> float:
    """Weighted action sum over all records of one (query, segment, pin)."""
    if not records:
        raise DataError("aggregate_label needs at least one record")
    key = (records[0].query_id, records[0].segment_id, records[0].pin_id)
    total = 0.0
    for rec in records:
        if (rec.query_id, rec.segment_id, rec.pin_id) != key:
            raise DataError("aggregate_label records must share (query, segment, pin)")
        for action, count in rec.action_counts.items():
            w = weights.get(action)
            if w is None:
                raise DataError(f"no weight configured for action '{action}'")
            total += w * count
    return total


def normalize_label(raw: float, age_days: float, position: float, config: LabelConfig) -> float:
    """Apply the position/age de-bias multiplier to a raw label.

    multiplier = 1 / (ln(age / tau) + 1) + exp(lambda_pos * position), with
    age clamped below at tau so the age term stays in (0, 1] and the log
    never crosses its pole. Natural log throughout.
    """
    if config.tau <= 0:
        raise ConfigError("tau must be > 0")
    if age_days < 0 or position < 0:
        raise DataError("age and position must be non-negative")
    age = max(float(age_days), config.tau)
    age_term = 1.0 / (math.log(age / config.tau) + 1.0)
    pos_term = math.exp(config.lambda_pos * float(position))
    return raw * (age_term + pos_term)


def build_instances(records: list[EngagementRecord], config: LabelConfig) -> list[LabeledInstance]:
    """Aggregate a log into one de-biased labeled instance per (q, seg, pin).

    Groups impressed at several ages/positions use the impression means as the
    single (age, position) the multiplier is evaluated at.
    """
    grouped: dict[tuple, list[EngagementRecord]] = {}
    for rec in records:
        grouped.setdefault((rec.query_id, rec.segment_id, rec.pin_id), []).append(rec)
    instances = []
    for (qid, sid, pid), recs in grouped.items():
        raw = aggregate_label(recs, config.action_weights)
        age = sum(r.age_days_at_impression for r in recs) / len(recs)
        pos = sum(r.position for r in recs) / len(recs)
        instances.append(
            LabeledInstance(
                query_id=qid,
                segment_id=sid,
                pin_id=pid,
                label=normalize_label(raw, age, pos, config),
                source=ENGAGEMENT,
            )
        )
    return instances


def group_instances(instances: list[LabeledInstance]) -> dict[tuple, list[LabeledInstance]]:
    groups: dict[tuple, list[LabeledInstance]] = {}
    for inst in instances:
        groups.setdefault(inst.group_key, []).append(inst)
    return groups


def prune_groups(groups: dict[tuple, list[LabeledInstance]], config: LabelConfig, seed: int) -> dict:
    """Two pruning rules: drop groups with no positive label, then randomly
    downsample negatives (label <= 0) to neg_cap per group.

    Sampling is seeded and mixes the group key into the stream, so a group's
    kept negatives do not depend on which other groups exist.
    """
    pruned: dict[tuple, list[LabeledInstance]] = {}
    for key in groups:
        members = groups[key]
        positives = [m for m in members if m.label > 0]
        if not positives:
            continue
        negatives = [m for m in members if m.label <= 0]
        if len(negatives) > config.neg_cap:
            rng = np.random.default_rng(derived_seed(seed, "prune", key[0], key[1]))
            keep = rng.choice(len(negatives), size=config.neg_cap, replace=False)
            negatives = [negatives[i] for i in sorted(int(i) for i in keep)]
        pruned[key] = positives + negatives
    return pruned


def average_judgments(judgment: RelevanceJudgment) -> LabeledInstance:
    """Mean of 3-level ratings; the relevance source has no segment, so the
    group key uses segment_id 'all'."""
    if not judgment.ratings:
        raise DataError(f"judgment for ({judgment.query_id}, {judgment.pin_id}) has no ratings")
    for r in judgment.ratings:
        if r not in (0, 1, 2):
            raise DataError(
                f"judgment for ({judgment.query_id}, {judgment.pin_id}) has rating {r}; valid ratings are 0, 1, 2"
            )
    return LabeledInstance(
        query_id=judgment.query_id,
        segment_id="all",
        pin_id=judgment.pin_id,
        label=float(sum(judgment.ratings)) / len(judgment.ratings),
        source=RELEVANCE,
    )


def discretize(label: float, cuts) -> int:
    """Map a continuous label to ordinal 1..4 by three ascending cuts.

    Intervals: (-inf, c1] -> 1, (c1, c2] -> 2, (c2, c3] -> 3, (c3, inf) -> 4.
    """
    c1, c2, c3 = cuts
    if not (c1 < c2 < c3):
        raise ConfigError("discretize cuts must be strictly ascending")
    if label <= c1:
        return 1
    if label <= c2:
        return 2
    if label <= c3:
        return 3
    return 4


def derive_cuts(train_instances: list[LabeledInstance]) -> tuple:
    """Default cuts: quartiles of the positive training labels.

    Collapsed quartiles (few distinct positives) are nudged apart so the cuts
    stay strictly ascending.
    """
    positives = np.array([i.label for i in train_instances if i.label > 0], dtype=np.float64)
    if positives.size == 0:
        raise DataError("cannot derive discretization cuts: no positive training labels")
    cuts = [float(np.quantile(positives, q)) for q in (0.25, 0.50, 0.75)]
    for i in (1, 2):
        if cuts[i] <= cuts[i - 1]:
            cuts[i] = cuts[i - 1] + 1e-9 * (1.0 + abs(cuts[i - 1]))
    return tuple(cuts)


def apply_ordinals(instances: list[LabeledInstance], cuts) -> None:
    for inst in instances:
        inst.ordinal_label = discretize(inst.label, cuts)
