"""Evaluation reports and side-by-side comparisons.

A report is one ranking's scorecard: NDCG aggregates for both label sources,
replay rates, composition ratios, and the production latency reference table
for context. Comparisons are relative deltas against a baseline, with a
plain "undefined" marker where the baseline is zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

from ..cascade.latency import REFERENCE_BUCKET_SHARES
from ..errors import DataError
from ..util import write_json
from .metrics import DEFAULT_CUTOFFS, mean_with_exclusions, ndcg_from_ranking
from .replay import freshness_localness, replay_metrics

RATIO_NAMES = ("L_imp", "F_imp", "L_repin", "F_repin", "L_click", "F_click")
REPLAY_NAMES = ("Q_repin", "Q_click", "Q_closeup", "Q_engaged")


@dataclass
class EvalReport:
    name: str
    ndcg_engagement: dict  # cutoff -> {"mean": float|None, "excluded": int}
    ndcg_relevance: dict
    replay: dict  # aggregate replay rates
    ratios: dict  # the six composition ratios
    per_query: dict = field(default_factory=dict)  # source -> cutoff -> {key: val}
    latency_reference: dict = field(default_factory=lambda: REFERENCE_BUCKET_SHARES)

    def validate(self) -> None:
        for table in (self.ndcg_engagement, self.ndcg_relevance):
            for cutoff, cell in table.items():
                v = cell["mean"]
                if v is not None and not 0.0 <= v <= 1.0 + 1e-9:
                    raise DataError(f"NDCG@{cutoff} out of [0, 1]: {v}")
        for name in RATIO_NAMES:
            v = self.ratios[name]
            if not 0.0 <= v <= 1.0 + 1e-9:
                raise DataError(f"ratio {name} out of [0, 1]: {v}")

    def flat_metrics(self) -> dict:
        """One flat name -> value map; the unit of comparison and CSV rows."""
        out = {}
        for source, table in (("e", self.ndcg_engagement), ("r", self.ndcg_relevance)):
            for cutoff in sorted(table):
                out[f"ndcg_{source}@{cutoff}"] = table[cutoff]["mean"]
        for name in REPLAY_NAMES:
            out[name] = self.replay.get(name)
        for name in RATIO_NAMES:
            out[name] = self.ratios.get(name)
        return out

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "ndcg_engagement": {str(k): v for k, v in self.ndcg_engagement.items()},
            "ndcg_relevance": {str(k): v for k, v in self.ndcg_relevance.items()},
            "replay": self.replay,
            "ratios": self.ratios,
            "per_query": {
                source: {
                    str(cutoff): {f"{q}|{s}": v for (q, s), v in table.items()}
                    for cutoff, table in cutoffs.items()
                }
                for source, cutoffs in self.per_query.items()
            },
            "latency_reference": self.latency_reference,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        def unkey(table):
            return {tuple(k.split("|", 1)): v for k, v in table.items()}

        return cls(
            name=d["name"],
            ndcg_engagement={int(k): v for k, v in d["ndcg_engagement"].items()},
            ndcg_relevance={int(k): v for k, v in d["ndcg_relevance"].items()},
            replay=d["replay"],
            ratios=d["ratios"],
            per_query={
                source: {int(c): unkey(t) for c, t in cutoffs.items()}
                for source, cutoffs in d.get("per_query", {}).items()
            },
            latency_reference=d.get("latency_reference", REFERENCE_BUCKET_SHARES),
        )


def build_report(
    name: str,
    rankings: dict,
    engagement_labels: dict,
    relevance_labels: dict,
    holdout: list,
    corpus,
    cutoffs=DEFAULT_CUTOFFS,
    k: int = 25,
) -> EvalReport:
    """Score one set of rankings.

    `rankings` maps (query_id, segment_id) to ranked pin ids. Engagement
    labels are keyed by (query_id, segment_id) then pin id; relevance labels
    by (query_id, "all"), applied to every segment of that query.
    """
    per_query = {"engagement": {p: {} for p in cutoffs}, "relevance": {p: {} for p in cutoffs}}
    for key, pids in rankings.items():
        qid, _ = key
        eng = engagement_labels.get(key)
        rel = relevance_labels.get((qid, "all"))
        for p in cutoffs:
            per_query["engagement"][p][key] = (
                ndcg_from_ranking(pids, eng, p) if eng else None
            )
            per_query["relevance"][p][key] = (
                ndcg_from_ranking(pids, rel, p) if rel else None
            )

    def aggregate(table):
        out = {}
        for p in cutoffs:
            mean, excluded = mean_with_exclusions(table[p].values())
            out[p] = {"mean": mean, "excluded": excluded}
        return out

    replay = replay_metrics(rankings, holdout, k=k)
    ratios = freshness_localness(rankings, corpus, holdout, k=k)
    report = EvalReport(
        name=name,
        ndcg_engagement=aggregate(per_query["engagement"]),
        ndcg_relevance=aggregate(per_query["relevance"]),
        replay=replay["aggregate"],
        ratios=ratios,
        per_query=per_query,
    )
    report.validate()
    return report


def compare(report_a: EvalReport, report_b: EvalReport) -> dict:
    """Relative change of b against a per metric: (b - a) / a.

    A zero or missing baseline value yields the string "undefined" instead of
    a number. Reports must cover the same query keys.
    """
    keys_a = _query_keys(report_a)
    keys_b = _query_keys(report_b)
    if keys_a != keys_b:
        only_a = sorted(keys_a - keys_b)[:3]
        only_b = sorted(keys_b - keys_a)[:3]
        raise DataError(
            f"reports cover different query sets (a-only {only_a}, b-only {only_b})"
        )
    a_vals = report_a.flat_metrics()
    b_vals = report_b.flat_metrics()
    table = {}
    for metric, a in a_vals.items():
        b = b_vals.get(metric)
        if a is None or b is None or a == 0.0:
            table[metric] = "undefined"
        else:
            table[metric] = (b - a) / a
    return table


def _query_keys(report: EvalReport) -> set:
    keys = set()
    for cutoffs in report.per_query.values():
        for table in cutoffs.values():
            keys.update(table.keys())
    return keys


def write_report(report: EvalReport, json_path, csv_path) -> None:
    """JSON for machines plus an aligned metric,value CSV for quick reading."""
    write_json(json_path, report.to_dict())
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for metric, value in report.flat_metrics().items():
            writer.writerow([metric, "" if value is None else repr(value)])


def write_comparison(table: dict, names: tuple, json_path, csv_path) -> None:
    write_json(json_path, {"baseline": names[0], "candidate": names[1], "deltas": table})
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "relative_delta"])
        for metric, value in table.items():
            writer.writerow([metric, value if isinstance(value, str) else repr(value)])
