"""Latency accounting for the funnel, in two modes.

Wall mode times a callable directly and is only meaningful on quiet machines;
it backs the speedup comparison between the cascade and exhaustive scoring.
Simulated mode prices each stage by a fixed per-item cost, so latency
distributions are reproducible and the effect of a smarter early stage shows
up as smaller downstream candidate counts, not as timer noise.

The reference bucket shares below describe a production-scale deployment:
replacing the hand-tuned first stage with a trained linear ranker moved a
large share of queries out of the slowest bucket. The simulated workload is
checked against that direction, not the absolute numbers.
"""

from __future__ import annotations

import time
from statistics import median

import numpy as np

from ..errors import ConfigError, DataError

# per-item stage costs in milliseconds; calibration constants for the
# simulated cost model, chosen so the full stage dominates at funnel scale
STAGE_UNIT_COST_MS = {"lightweight": 0.0005, "full": 0.15, "rerank": 0.05}

BUCKET_LABELS = ("<50ms", "50-200ms", ">200ms")

# production reference: share of queries per bucket, in percent
REFERENCE_BUCKET_SHARES = {
    "rule": {"<50ms": 5.0, "50-200ms": 43.0, ">200ms": 52.0},
    "ranksvm": {"<50ms": 8.0, "50-200ms": 61.0, ">200ms": 31.0},
}


def bucket_label(latency_ms: float) -> str:
    if latency_ms < 50.0:
        return BUCKET_LABELS[0]
    if latency_ms <= 200.0:
        return BUCKET_LABELS[1]
    return BUCKET_LABELS[2]


def bucket_shares(latencies_ms) -> dict:
    """Percent of queries per latency bucket."""
    lats = list(latencies_ms)
    if not lats:
        raise DataError("no latencies to bucket")
    counts = {label: 0 for label in BUCKET_LABELS}
    for lat in lats:
        counts[bucket_label(lat)] += 1
    return {label: 100.0 * c / len(lats) for label, c in counts.items()}


def simulated_query_cost(stage_counts) -> float:
    """Price one query: sum over stages of items_in * unit cost.

    `stage_counts` is a sequence of (subset, n_in) in funnel order.
    """
    total = 0.0
    for subset, n_in in stage_counts:
        unit = STAGE_UNIT_COST_MS.get(subset)
        if unit is None:
            raise ConfigError(f"no unit cost for stage subset {subset!r}")
        total += unit * int(n_in)
    return total


def measure_wall_ms(fn, warmups: int = 3, runs: int = 5) -> float:
    """Median wall time of fn() over `runs` calls, after discarded warmups."""
    if runs < 1:
        raise ConfigError("runs must be >= 1")
    for _ in range(warmups):
        fn()
    samples = []
    for _ in range(runs):
        t0 = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - t0) * 1000.0)
    return float(median(samples))


def calibrate_floor(scores_pool, quantile: float) -> float:
    """Score floor for an adaptive cut: a pooled-score quantile.

    Pool stage-one scores over a calibration workload and take a high
    quantile; at serving time only candidates at or above the floor pass,
    subject to the stage's min_keep and keep_top clamps.
    """
    pool = np.asarray(scores_pool, dtype=np.float64)
    if pool.size == 0:
        raise DataError("empty score pool")
    if not 0.0 <= quantile <= 1.0:
        raise ConfigError("quantile must be in [0, 1]")
    return float(np.quantile(pool, quantile))


def simulate_funnel_latencies(
    stage1_scores_per_query,
    floor: float,
    full_keep: int = 100,
    min_keep: int = 100,
) -> list:
    """Simulated latency per query for a three-stage funnel with an adaptive
    first cut.

    For each query the first stage scores everything, then passes on exactly
    the candidates at or above the floor (at least min_keep). The pass-set
    size is deliberately unbounded above: a sharper first stage earns a higher
    floor at the same recall and pays less downstream, which is the effect the
    simulation exists to expose. The re-ranker scans what the full stage
    keeps. Only candidate counts matter here; scores beyond the first stage
    never affect cost.
    """
    out = []
    for scores in stage1_scores_per_query:
        s = np.asarray(scores, dtype=np.float64)
        n1 = len(s)
        if n1 == 0:
            raise DataError("query with no candidates")
        above = int(np.count_nonzero(s >= floor))
        n2 = min(n1, max(above, min_keep))
        n3 = min(full_keep, n2)
        out.append(
            simulated_query_cost([("lightweight", n1), ("full", n2), ("rerank", n3)])
        )
    return out
