"""Engagement log simulator.

Each simulated search shows a page of uniformly sampled pins in random order.
The probability that a shown pin draws positive engagement factors as

    p = base_rate * planted_utility * position_discount * freshness_factor

with position_discount = 1 / (1 + position) ** position_bias and
freshness_factor = exp(-age / freshness_scale). Position bias 0 makes the
engagement rate position independent. Hides are drawn separately on examined
low-utility pins, so a zero-utility pin can be hidden but never engaged.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DataError
from ..util import derived_seed
from .types import Corpus, EngagementRecord, POSITIVE_ACTIONS, DEFAULT_ACTION_VOLUMES


def simulate_log(
    corpus: Corpus,
    n_sessions: int,
    position_bias: float,
    seed: int,
    page_size: int = 20,
    base_rate: float = 0.35,
    hide_rate: float = 0.02,
    freshness_scale: float = 365.0,
    action_volumes: dict | None = None,
) -> list[EngagementRecord]:
    """Simulate `n_sessions` searches and return one record per impression."""
    if not corpus.pins or not corpus.queries or not corpus.segments:
        raise DataError("cannot simulate a log over an empty corpus")
    if not corpus.utility:
        raise DataError("corpus has no planted utility; regenerate with utility enabled")
    if n_sessions < 1:
        raise ConfigError("n_sessions must be >= 1")
    if position_bias < 0:
        raise ConfigError("position_bias must be >= 0")

    volumes = dict(action_volumes or DEFAULT_ACTION_VOLUMES)
    pos_names = [a for a in POSITIVE_ACTIONS if volumes.get(a, 0) > 0]
    if not pos_names:
        raise ConfigError("at least one positive action needs a non-zero volume")
    pos_weights = np.array([volumes[a] for a in pos_names], dtype=np.float64)
    pos_weights /= pos_weights.sum()

    rng = np.random.default_rng(derived_seed(seed, "simlog"))
    n_pins = len(corpus.pins)
    k = min(page_size, n_pins)
    ages = corpus.columns().age_days
    fresh_factor = np.exp(-ages / freshness_scale)
    discount = 1.0 / (1.0 + np.arange(k, dtype=np.float64)) ** position_bias

    records = []
    n_queries = len(corpus.queries)
    n_segments = len(corpus.segments)
    for _ in range(n_sessions):
        qi = int(rng.integers(n_queries))
        si = int(rng.integers(n_segments))
        query = corpus.queries[qi]
        segment = corpus.segments[si]
        shown = rng.choice(n_pins, size=k, replace=False)
        util = corpus.utility[query.query_id][shown]
        p_engage = base_rate * util * discount * fresh_factor[shown]
        engaged = rng.random(k) < p_engage
        hidden = (~engaged) & (rng.random(k) < hide_rate * (1.0 - util) * discount)
        actions = rng.choice(len(pos_names), size=k, p=pos_weights)
        for pos in range(k):
            pin = corpus.pins[int(shown[pos])]
            if engaged[pos]:
                counts = {pos_names[int(actions[pos])]: 1}
            elif hidden[pos]:
                counts = {"hide": 1}
            else:
                counts = {}
            records.append(
                EngagementRecord(
                    query_id=query.query_id,
                    segment_id=segment.segment_id,
                    pin_id=pin.pin_id,
                    action_counts=counts,
                    position=pos,
                    age_days_at_impression=pin.age_days,
                )
            )
    return records
