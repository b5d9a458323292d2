"""Group-level dataset split: all instances of one (query, segment) group land
in the same bucket, so no query leaks across train/test/validation."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..util import derived_seed
from .labels import LabeledInstance

SPLIT_NAMES = ("train", "test", "valid")
DEFAULT_FRACTIONS = (0.7, 0.2, 0.1)


def _validate_fractions(fractions) -> tuple:
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3:
        raise ConfigError("need exactly three split fractions (train, test, valid)")
    if any(f < 0 for f in fractions):
        raise ConfigError("split fractions must be non-negative")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError("split fractions must sum to 1")
    return fractions


def split_groups(group_keys, fractions, seed: int) -> dict:
    """Assign group keys to train/test/valid with largest-remainder counts.

    Deterministic: keys are sorted, shuffled with the seed, then cut. Bucket
    sizes match floor(f * n) plus remainder distribution, so each bucket is
    within one group of its exact share.
    """
    fractions = _validate_fractions(fractions)
    keys = sorted(set(group_keys))
    n = len(keys)
    rng = np.random.default_rng(derived_seed(seed, "split"))
    order = rng.permutation(n)

    shares = [f * n for f in fractions]
    counts = [int(np.floor(s)) for s in shares]
    remainder = n - sum(counts)
    by_frac = sorted(range(3), key=lambda i: (-(shares[i] - counts[i]), i))
    for i in range(remainder):
        counts[by_frac[i % 3]] += 1

    assignment = {}
    cursor = 0
    for name, count in zip(SPLIT_NAMES, counts):
        for idx in order[cursor : cursor + count]:
            assignment[keys[int(idx)]] = name
        cursor += count
    return assignment


def split_dataset(instances: list[LabeledInstance], fractions, seed: int):
    """Split instances by group; returns (train, test, valid) preserving the
    input order inside each bucket, plus the group assignment map."""
    assignment = split_groups([i.group_key for i in instances], fractions, seed)
    buckets = {name: [] for name in SPLIT_NAMES}
    for inst in instances:
        buckets[assignment[inst.group_key]].append(inst)
    return buckets["train"], buckets["test"], buckets["valid"], assignment
