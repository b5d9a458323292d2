"""Preference pair extraction within (query, segment) groups."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..util import derived_seed
from .labels import LabeledInstance


@dataclass(frozen=True)
class PreferencePair:
    query_id: str
    segment_id: str
    winner_pin: str
    loser_pin: str


def ordered_index_pairs(labels) -> list[tuple]:
    """All ordered (i, j) with labels[i] > labels[j], in deterministic
    enumeration order (i outer, j inner)."""
    n = len(labels)
    out = []
    for i in range(n):
        li = labels[i]
        for j in range(n):
            if li > labels[j]:
                out.append((i, j))
    return out


def subsample_pairs(pairs: list, max_pairs: int, seed: int, *tags) -> list:
    """Uniformly subsample to max_pairs, keeping enumeration order; the tags
    (typically the group key) are mixed into the seed."""
    if max_pairs < 1:
        raise ConfigError("max_pairs must be >= 1")
    if len(pairs) <= max_pairs:
        return list(pairs)
    rng = np.random.default_rng(derived_seed(seed, "pairs", *tags))
    keep = rng.choice(len(pairs), size=max_pairs, replace=False)
    return [pairs[i] for i in sorted(int(i) for i in keep)]


def extract_pairs(group: list[LabeledInstance], max_pairs_per_group: int, seed: int) -> list[PreferencePair]:
    """Preference pairs for one group: every ordered pair whose labels differ,
    higher label preferred, subsampled to the cap."""
    if not group:
        return []
    qid, sid = group[0].group_key
    idx_pairs = ordered_index_pairs([inst.label for inst in group])
    idx_pairs = subsample_pairs(idx_pairs, max_pairs_per_group, seed, qid, sid)
    return [
        PreferencePair(query_id=qid, segment_id=sid, winner_pin=group[i].pin_id, loser_pin=group[j].pin_id)
        for i, j in idx_pairs
    ]
