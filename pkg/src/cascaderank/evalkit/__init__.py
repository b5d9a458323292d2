from .figures import comparison_bars, latency_buckets, loss_curves, metric_bars
from .metrics import (
    DEFAULT_CUTOFFS,
    dcg,
    grouped_ndcg,
    idcg,
    mean_with_exclusions,
    ndcg,
    ndcg_from_ranking,
)
from .replay import (
    FRESH_AGE_DAYS,
    count_searches,
    freshness_localness,
    replay_metrics,
)
from .report import (
    EvalReport,
    build_report,
    compare,
    write_comparison,
    write_report,
)

__all__ = [
    "DEFAULT_CUTOFFS",
    "FRESH_AGE_DAYS",
    "EvalReport",
    "dcg",
    "grouped_ndcg",
    "idcg",
    "ndcg",
    "ndcg_from_ranking",
    "mean_with_exclusions",
    "count_searches",
    "replay_metrics",
    "freshness_localness",
    "build_report",
    "compare",
    "write_report",
    "write_comparison",
    "metric_bars",
    "comparison_bars",
    "latency_buckets",
    "loss_curves",
]
