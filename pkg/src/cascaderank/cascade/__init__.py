from .config import (
    DEFAULT_FUNNEL,
    AdaptiveCut,
    CascadeConfig,
    RerankPolicy,
    StageSpec,
    default_cascade_config,
)
from .latency import (
    BUCKET_LABELS,
    REFERENCE_BUCKET_SHARES,
    STAGE_UNIT_COST_MS,
    bucket_label,
    bucket_shares,
    calibrate_floor,
    measure_wall_ms,
    simulate_funnel_latencies,
    simulated_query_cost,
)
from .runner import (
    CascadeResult,
    StageResult,
    rerank_stage,
    run_cascade,
    score_stage,
)

__all__ = [
    "AdaptiveCut",
    "CascadeConfig",
    "CascadeResult",
    "RerankPolicy",
    "StageSpec",
    "StageResult",
    "DEFAULT_FUNNEL",
    "BUCKET_LABELS",
    "REFERENCE_BUCKET_SHARES",
    "STAGE_UNIT_COST_MS",
    "default_cascade_config",
    "run_cascade",
    "score_stage",
    "rerank_stage",
    "bucket_label",
    "bucket_shares",
    "calibrate_floor",
    "measure_wall_ms",
    "simulate_funnel_latencies",
    "simulated_query_cost",
]
