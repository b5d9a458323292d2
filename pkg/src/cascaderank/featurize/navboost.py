"""Historical engagement propensity tables.

Navboost keys on (query_id, pin_id) and tracks per-action positives over
impressions; tokenboost keys on (query token, pin_id) and tracks any positive
engagement. Both smooth with a Beta prior so unseen keys fall back to
alpha / (alpha + beta) and every propensity stays strictly inside (0, 1).

Tables must be built from the training split only; the builder takes the raw
records already filtered to training groups.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigError, DataError
from ..synthlog.types import POSITIVE_ACTIONS

DEFAULT_ALPHA = 1.0
DEFAULT_BETA = 9.0
KEY_SEP = "|"


@dataclass
class NavboostTable:
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    # "qid|pid" -> {"imp": n, "<action>": positives, ...}
    query_stats: dict = field(default_factory=dict)
    # "token|pid" -> {"imp": n, "pos": positives}
    token_stats: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ConfigError("smoothing parameters alpha and beta must be > 0")

    def prior(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    def _smooth(self, positives: float, impressions: float) -> float:
        return (positives + self.alpha) / (impressions + self.alpha + self.beta)

    def propensity(self, query_id: str, pin_id: str, action: str) -> float:
        stats = self.query_stats.get(f"{query_id}{KEY_SEP}{pin_id}")
        if stats is None:
            return self.prior()
        return self._smooth(stats.get(action, 0), stats["imp"])

    def seen(self, query_id: str, pin_id: str) -> bool:
        return f"{query_id}{KEY_SEP}{pin_id}" in self.query_stats

    def token_propensity(self, token: str, pin_id: str) -> float:
        stats = self.token_stats.get(f"{token}{KEY_SEP}{pin_id}")
        if stats is None:
            return self.prior()
        return self._smooth(stats.get("pos", 0), stats["imp"])

    def token_seen(self, token: str, pin_id: str) -> bool:
        return f"{token}{KEY_SEP}{pin_id}" in self.token_stats

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "query_stats": self.query_stats,
            "token_stats": self.token_stats,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NavboostTable":
        return cls(
            alpha=float(d["alpha"]),
            beta=float(d["beta"]),
            query_stats={k: {a: int(c) for a, c in v.items()} for k, v in d["query_stats"].items()},
            token_stats={k: {a: int(c) for a, c in v.items()} for k, v in d["token_stats"].items()},
        )


def build_navboost(
    records,
    query_tokens: dict,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
    positive_actions=POSITIVE_ACTIONS,
) -> NavboostTable:
    """Accumulate propensity stats from engagement records.

    `query_tokens` maps query_id to its token list (token-level stats count
    each distinct query token once per impression). Records for unknown
    queries raise DataError so silent key mismatches cannot produce an
    all-prior table.
    """
    table = NavboostTable(alpha=alpha, beta=beta)
    for rec in records:
        tokens = query_tokens.get(rec.query_id)
        if tokens is None:
            raise DataError(f"record references unknown query '{rec.query_id}'")
        qkey = f"{rec.query_id}{KEY_SEP}{rec.pin_id}"
        stats = table.query_stats.setdefault(qkey, {"imp": 0})
        stats["imp"] += 1
        any_positive = False
        for action in positive_actions:
            if rec.action_counts.get(action, 0) > 0:
                stats[action] = stats.get(action, 0) + 1
                any_positive = True
        for token in sorted(set(tokens)):
            tkey = f"{token}{KEY_SEP}{rec.pin_id}"
            tstats = table.token_stats.setdefault(tkey, {"imp": 0, "pos": 0})
            tstats["imp"] += 1
            if any_positive:
                tstats["pos"] += 1
    return table
