"""Replaying a held-out engagement log against ranked lists.

The held-out log must come from a split the models never trained on; the
replay only credits actions on pins the ranking actually surfaced in its top
k. A search is one result page, identified by its position-0 impression, so
per-search rates stay comparable across rankings of different depths.
"""

from __future__ import annotations

from collections import defaultdict

from ..errors import DataError
from ..synthlog import POSITIVE_ACTIONS, Corpus

REPLAY_ACTIONS = ("repin", "click", "closeup")

FRESH_AGE_DAYS = 30.0


def count_searches(records) -> dict:
    """Searches per (query_id, segment_id): one per position-0 impression."""
    out = defaultdict(int)
    for r in records:
        if r.position == 0:
            out[(r.query_id, r.segment_id)] += 1
    return dict(out)


def _top_k_sets(rankings: dict, k: int) -> dict:
    return {key: set(pids[:k]) for key, pids in rankings.items()}


def replay_metrics(rankings: dict, holdout: list, k: int = 25) -> dict:
    """Per-search action rates credited through the top-k of each ranking.

    `rankings` maps (query_id, segment_id) to a ranked pin-id list. For each
    key with at least one held-out search, every held-out action on a pin the
    ranking surfaced counts; rates are per search, then averaged over keys.
    Keys without held-out searches are excluded and counted.
    """
    if k < 1:
        raise DataError("k must be >= 1")
    searches = count_searches(holdout)
    tops = _top_k_sets(rankings, k)
    credited = {key: defaultdict(float) for key in rankings}
    for r in holdout:
        key = (r.query_id, r.segment_id)
        top = tops.get(key)
        if top is None or r.pin_id not in top:
            continue
        for action, count in r.action_counts.items():
            credited[key][action] += count

    per_query = {}
    for key in rankings:
        n_searches = searches.get(key, 0)
        if n_searches == 0:
            per_query[key] = None
            continue
        c = credited[key]
        engaged = sum(c.get(a, 0.0) for a in POSITIVE_ACTIONS)
        per_query[key] = {
            "Q_repin": c.get("repin", 0.0) / n_searches,
            "Q_click": c.get("click", 0.0) / n_searches,
            "Q_closeup": c.get("closeup", 0.0) / n_searches,
            "Q_engaged": engaged / n_searches,
        }

    kept = [v for v in per_query.values() if v is not None]
    means = {}
    for name in ("Q_repin", "Q_click", "Q_closeup", "Q_engaged"):
        means[name] = sum(v[name] for v in kept) / len(kept) if kept else 0.0
    means["queries_evaluated"] = len(kept)
    means["queries_without_searches"] = len(per_query) - len(kept)
    return {"aggregate": means, "per_query": per_query}


def freshness_localness(
    rankings: dict,
    corpus: Corpus,
    holdout: list,
    k: int = 25,
    fresh_age_days: float = FRESH_AGE_DAYS,
) -> dict:
    """The six impression/action composition ratios over top-k pins.

    Local means the pin's linked country matches the segment's country; fresh
    means age at most `fresh_age_days`. The impression ratios cover every
    surfaced pin; the repin and click variants cover the distinct surfaced
    pins that drew that action in the held-out log. Empty denominators give
    0.0 rather than an error so sparse slices stay comparable.
    """
    if k < 1:
        raise DataError("k must be >= 1")
    acted = {a: defaultdict(set) for a in ("repin", "click")}
    for r in holdout:
        key = (r.query_id, r.segment_id)
        for action in acted:
            if r.action_counts.get(action, 0) >= 1:
                acted[action][key].add(r.pin_id)

    def ratio(num: int, den: int) -> float:
        return num / den if den else 0.0

    imp_total = imp_local = imp_fresh = 0
    counts = {a: {"total": 0, "local": 0, "fresh": 0} for a in acted}
    for (qid, sid), pids in rankings.items():
        segment = corpus.segment(sid)
        for pid in pids[:k]:
            pin = corpus.pin(pid)
            local = pin.linked_country == segment.country
            fresh = pin.age_days <= fresh_age_days
            imp_total += 1
            imp_local += local
            imp_fresh += fresh
            for action in acted:
                if pid in acted[action].get((qid, sid), ()):
                    counts[action]["total"] += 1
                    counts[action]["local"] += local
                    counts[action]["fresh"] += fresh
    if imp_total == 0:
        raise DataError("no impressed pins to rate")
    return {
        "L_imp": ratio(imp_local, imp_total),
        "F_imp": ratio(imp_fresh, imp_total),
        "L_repin": ratio(counts["repin"]["local"], counts["repin"]["total"]),
        "F_repin": ratio(counts["repin"]["fresh"], counts["repin"]["total"]),
        "L_click": ratio(counts["click"]["local"], counts["click"]["total"]),
        "F_click": ratio(counts["click"]["fresh"], counts["click"]["total"]),
    }
