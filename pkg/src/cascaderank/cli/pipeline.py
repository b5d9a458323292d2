"""Pipeline steps behind the CLI, plus the reproduce orchestration.

Determinism contract: every JSON, JSONL, CSV, and PNG artifact is a pure
function of the experiment config, so running the same config twice gives
byte-identical files. Wall-clock measurements never enter those files; they
go to a separate timings document, and the one benchmark file that must hold
wall numbers carries "latency" in its name so callers can exclude it.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..cascade import (
    REFERENCE_BUCKET_SHARES,
    STAGE_UNIT_COST_MS,
    CascadeConfig,
    bucket_shares,
    calibrate_floor,
    measure_wall_ms,
    run_cascade,
    simulate_funnel_latencies,
)
from ..ensemble import StackedModel, select_gamma, train_stacked_gbrt
from ..errors import CascadeRankError, ConfigError, DataError
from ..evalkit import (
    build_report,
    compare,
    comparison_bars,
    grouped_ndcg,
    latency_buckets,
    loss_curves,
    metric_bars,
    write_comparison,
    write_report,
)
from ..featurize import FeatureContext, build_corpus_stats, build_navboost, default_schema
from ..labelgen import (
    DEFAULT_FRACTIONS,
    SPLIT_NAMES,
    LabelConfig,
    LabeledInstance,
    apply_ordinals,
    average_judgments,
    build_instances,
    derive_cuts,
    group_instances,
    prune_groups,
    split_dataset,
)
from ..rankmodels import (
    build_dataset,
    concat_datasets,
    make_rule_model,
    neutral_segment,
    save_model,
    train_cnn,
    train_dnn,
    train_gbdt,
    train_gbrt,
    train_ranknet,
    train_ranksvm,
)
from ..synthlog import Corpus, generate_corpus, simulate_log, write_corpus, write_log
from ..util import derived_seed, ensure_dir, read_json, write_json, write_jsonl
from .experiment import TRAINED_KINDS, ExperimentConfig

KEY_SEP = "|"

# cascade variants ranked during reproduce: every trained kind plus the stack
# behind the same first stage, and one run with rule models on the cheap
# stages to expose what the trained lightweight and rerank stages buy
BASELINE_VARIANT = "ranksvm"
RULE_STAGES_VARIANT = "rule_stages"


def key_str(key: tuple) -> str:
    return f"{key[0]}{KEY_SEP}{key[1]}"


def parse_key(s: str) -> tuple:
    qid, _, sid = s.partition(KEY_SEP)
    return (qid, sid)


# ---------------------------------------------------------------- labels


@dataclass
class LabelArtifacts:
    """Split label sets plus everything needed to rebuild features."""

    engagement: dict = field(default_factory=dict)  # split -> [LabeledInstance]
    relevance: dict = field(default_factory=dict)
    assignment: dict = field(default_factory=dict)  # source -> {(q, s): split}
    cuts: tuple = ()
    config: LabelConfig = field(default_factory=LabelConfig)

    def label_map(self, source: str, split: str) -> dict:
        """(query, segment) -> {pin_id: label} for one split."""
        out: dict = {}
        for inst in getattr(self, source)[split]:
            out.setdefault(inst.group_key, {})[inst.pin_id] = inst.label
        return out

    def group_keys(self, source: str, split: str) -> list:
        return sorted({i.group_key for i in getattr(self, source)[split]})


def build_labels(records, judgments, config: LabelConfig, seed: int) -> LabelArtifacts:
    """Raw log and judgments to split, discretized label sets.

    Engagement instances are aggregated, de-biased, pruned, and split by
    (query, segment) group; the ordinal cuts come from the positive training
    labels unless the config pins them. Relevance instances average the
    ratings under the segment-free group key and get their own group split.
    """
    instances = build_instances(records, config)
    pruned = prune_groups(group_instances(instances), config, seed)
    flat = [inst for key in sorted(pruned) for inst in pruned[key]]
    if not flat:
        raise DataError("no labeled groups survive pruning; the log may be too sparse")
    eng_train, eng_test, eng_valid, eng_assign = split_dataset(
        flat, DEFAULT_FRACTIONS, derived_seed(seed, "split", "engagement")
    )

    cuts = config.discretize_cuts or derive_cuts(eng_train)
    resolved = LabelConfig.from_dict({**config.to_dict(), "discretize_cuts": list(cuts)})
    for bucket in (eng_train, eng_test, eng_valid):
        apply_ordinals(bucket, cuts)

    rel_instances = sorted(
        (average_judgments(j) for j in judgments),
        key=lambda i: (i.query_id, i.pin_id),
    )
    if not rel_instances:
        raise DataError("no relevance judgments given")
    rel_train, rel_test, rel_valid, rel_assign = split_dataset(
        rel_instances, DEFAULT_FRACTIONS, derived_seed(seed, "split", "relevance")
    )

    return LabelArtifacts(
        engagement={"train": eng_train, "test": eng_test, "valid": eng_valid},
        relevance={"train": rel_train, "test": rel_test, "valid": rel_valid},
        assignment={"engagement": eng_assign, "relevance": rel_assign},
        cuts=tuple(cuts),
        config=resolved,
    )


def write_label_artifacts(arts: LabelArtifacts, out_dir, sources: dict | None = None) -> None:
    """Persist label splits under out_dir; `sources` records where the corpus,
    log, and judgments live so later steps can reload them."""
    ensure_dir(out_dir)
    for source in ("engagement", "relevance"):
        src_dir = os.path.join(out_dir, source)
        ensure_dir(src_dir)
        for split in SPLIT_NAMES:
            rows = (i.to_dict() for i in getattr(arts, source)[split])
            write_jsonl(os.path.join(src_dir, f"{split}.jsonl"), rows)
    write_json(
        os.path.join(out_dir, "assignment.json"),
        {
            source: {key_str(k): v for k, v in sorted(arts.assignment[source].items())}
            for source in ("engagement", "relevance")
        },
        indent=2,
    )
    write_json(os.path.join(out_dir, "cuts.json"), {"cuts": [float(c) for c in arts.cuts]})
    write_json(os.path.join(out_dir, "config.json"), arts.config.to_dict(), indent=2)
    if sources:
        write_json(
            os.path.join(out_dir, "sources.json"),
            {
                k: os.path.relpath(os.path.abspath(v), os.path.abspath(out_dir))
                for k, v in sorted(sources.items())
            },
            indent=2,
        )


def read_label_artifacts(labels_dir) -> LabelArtifacts:
    from ..util import read_jsonl

    cfg_path = os.path.join(labels_dir, "config.json")
    if not os.path.exists(cfg_path):
        raise DataError(f"{labels_dir}: not a labels directory (config.json missing)")
    config = LabelConfig.from_dict(read_json(cfg_path))
    cuts = tuple(read_json(os.path.join(labels_dir, "cuts.json"))["cuts"])
    assignment_raw = read_json(os.path.join(labels_dir, "assignment.json"))
    arts = LabelArtifacts(cuts=cuts, config=config)
    for source in ("engagement", "relevance"):
        arts.assignment[source] = {parse_key(k): v for k, v in assignment_raw[source].items()}
        for split in SPLIT_NAMES:
            path = os.path.join(labels_dir, source, f"{split}.jsonl")
            getattr(arts, source)[split] = [LabeledInstance.from_dict(obj) for _, obj in read_jsonl(path)]
    return arts


def read_label_sources(labels_dir) -> dict:
    """Source paths recorded next to the labels, resolved against their dir."""
    path = os.path.join(labels_dir, "sources.json")
    if not os.path.exists(path):
        raise DataError(
            f"{labels_dir}: sources.json missing; regenerate the labels with the corpus and log paths"
        )
    base = os.path.abspath(labels_dir)
    return {k: os.path.normpath(os.path.join(base, v)) for k, v in read_json(path).items()}


# ---------------------------------------------------------------- features


def train_records(records, assignment: dict) -> list:
    """Records whose (query, segment) group landed in the training split.

    Groups pruned away before the split carry no assignment and are dropped,
    so the click table can never see held-out engagement.
    """
    return [r for r in records if assignment.get((r.query_id, r.segment_id)) == "train"]


def build_context(corpus: Corpus, records, assignment: dict | None = None) -> FeatureContext:
    """Feature context with the click table restricted to training groups."""
    kept = train_records(records, assignment) if assignment is not None else list(records)
    query_tokens = {q.query_id: q.tokens for q in corpus.queries}
    navboost = build_navboost(kept, query_tokens)
    return FeatureContext(corpus, build_corpus_stats(corpus.pins), navboost, default_schema())


def make_datasets(arts: LabelArtifacts, corpus: Corpus, ctx: FeatureContext, seed: int) -> dict:
    """Featurized datasets per (source, split), full subset, plus the
    lightweight and rerank training views used by the cheap stages."""
    out = {}
    for source in ("engagement", "relevance"):
        for split in SPLIT_NAMES:
            groups = group_instances(getattr(arts, source)[split])
            if not groups:
                raise DataError(f"{source}/{split} split is empty; need more sessions or judgments")
            out[(source, split)] = build_dataset(
                groups,
                corpus,
                ctx,
                arts.config,
                derived_seed(seed, "ds", source, split),
                subset="full",
                source=source,
                with_ordinals=(source == "engagement"),
            )
    eng_train = group_instances(arts.engagement["train"])
    for subset in ("lightweight", "rerank"):
        out[("engagement", "train", subset)] = build_dataset(
            eng_train,
            corpus,
            ctx,
            arts.config,
            derived_seed(seed, "ds", "engagement", "train"),
            subset=subset,
            source="engagement",
        )
    return out


def write_feature_artifacts(datasets: dict, ctx: FeatureContext, out_dir) -> None:
    ensure_dir(out_dir)
    write_json(os.path.join(out_dir, "schema.json"), ctx.schema.to_dict(), indent=2)
    write_json(os.path.join(out_dir, "navboost.json"), ctx.navboost.to_dict())
    for source in ("engagement", "relevance"):
        for split in SPLIT_NAMES:
            ds = datasets[(source, split)]

            def rows(ds=ds):
                for key, (start, stop) in zip(ds.group_keys, ds.group_slices):
                    for r in range(start, stop):
                        yield {
                            "query_id": key[0],
                            "segment_id": key[1],
                            "pin_id": ds.pin_ids[r],
                            "values": [float(v) for v in ds.X[r]],
                        }

            write_jsonl(os.path.join(out_dir, f"{source}_{split}.jsonl"), rows())


# ---------------------------------------------------------------- training


def train_model(kind: str, ds, hyper: dict, seed: int):
    """Dispatch one trainer; hyper keys mirror the trainer keyword names."""
    h = dict(hyper)
    common = {"seed": seed, "schema_id": ds.schema_id, "subset": ds.subset}
    if kind == "gbdt":
        return train_gbdt(ds.X, ds.labels, **h, **common)
    if kind == "gbrt":
        return train_gbrt(ds.X, ds.pairs, **h, source_tag=ds.source, **common)
    if kind == "ranksvm":
        return train_ranksvm(ds.X, ds.pairs, **h, **common)
    if kind == "ranknet":
        return train_ranknet(ds.X, ds.pairs, **h, **common)
    if kind == "dnn":
        h["hidden"] = tuple(h.get("hidden", (64, 64)))
        return train_dnn(ds.X, ds.ordinals, **h, **common)
    if kind == "cnn":
        h["conv_channels"] = tuple(h.get("conv_channels", (8, 16)))
        return train_cnn(ds.X, ds.ordinals, **h, **common)
    raise ConfigError(f"no trainer for model kind {kind!r}; trained kinds: {', '.join(TRAINED_KINDS)}")


def train_step_models(datasets: dict, model_hyper: dict, seed: int) -> dict:
    """All models the funnel variants need, in one deterministic pass."""
    eng_train = datasets[("engagement", "train")]
    rel_train = datasets[("relevance", "train")]
    models = {}
    for kind in TRAINED_KINDS:
        models[kind] = train_model(kind, eng_train, model_hyper[kind], derived_seed(seed, "train", kind))
    models["gbrt_relevance"] = train_model(
        "gbrt", rel_train, model_hyper["gbrt"], derived_seed(seed, "train", "gbrt", "relevance")
    )
    light = datasets[("engagement", "train", "lightweight")]
    models["ranksvm_lightweight"] = train_model(
        "ranksvm", light, model_hyper["ranksvm"], derived_seed(seed, "train", "ranksvm", "lightweight")
    )
    schema = default_schema()
    models["rule_lightweight"] = make_rule_model(schema.subset_names("lightweight"))
    models["rule_rerank"] = make_rule_model(schema.subset_names("rerank"), subset="rerank")
    rerank_ds = datasets[("engagement", "train", "rerank")]
    models["gbrt_rerank"] = train_model(
        "gbrt", rerank_ds, model_hyper["gbrt"], derived_seed(seed, "train", "gbrt", "rerank")
    )
    return models


def _group_tie_ranks(ds) -> np.ndarray:
    """Within-group rank of each row's pin id, ascending, for tie-breaks."""
    tie = np.empty(ds.n_rows, dtype=np.int64)
    for start, stop in ds.group_slices:
        pids = np.array(ds.pin_ids[start:stop])
        tie[start:stop] = np.argsort(np.argsort(pids, kind="stable"), kind="stable")
    return tie


def _valid_ndcg(model, ds, p: int = 10) -> float:
    mean, _ = grouped_ndcg(model.score_matrix(ds.X), ds.labels, ds.group_slices, p, _group_tie_ranks(ds))
    return 0.0 if mean is None else mean


def train_stack_step(datasets: dict, stack_cfg: dict, seed: int):
    """The two-source booster; gamma fixed by config or picked on validation.

    Returns (StackedModel, details dict). The stack blends the interleaved
    booster with the relevance-trained booster at serving time, so gamma
    controls both the training schedule and the serving mix.
    """
    eng_train = datasets[("engagement", "train")]
    rel_train = datasets[("relevance", "train")]
    X, pairs_e, pairs_r, rows_e, rows_r = concat_datasets(eng_train, rel_train)
    mode = stack_cfg.get("mode", "pairwise")
    trees = int(stack_cfg.get("trees", 30))
    stack_seed = derived_seed(seed, "train", "stacked")

    def fit(gamma: float):
        return train_stacked_gbrt(
            X,
            pairs_e,
            pairs_r,
            rows_e,
            rows_r,
            gamma=gamma,
            trees=trees,
            mode=mode,
            relevance_labels=rel_train.labels if mode == "mixed_pointwise" else None,
            seed=stack_seed,
            schema_id=eng_train.schema_id,
            subset=eng_train.subset,
        )

    gamma = stack_cfg.get("gamma")
    table = None
    if gamma is None:
        eng_valid = datasets[("engagement", "valid")]
        rel_valid = datasets[("relevance", "valid")]

        def eval_fn(model):
            return _valid_ndcg(model, eng_valid), _valid_ndcg(model, rel_valid)

        gamma, booster, table = select_gamma(fit, eval_fn)
    else:
        gamma = float(gamma)
        booster = fit(gamma)
    details = {"gamma": gamma, "mode": mode, "trees": trees, "table": table}
    return booster, details


# ---------------------------------------------------------------- ranking


def stage_model_bindings(config: CascadeConfig, models: dict, full_name: str, rule_stages: bool = False) -> dict:
    """Map stage names to models for one funnel variant.

    Stage subsets pick the model family; `full_name` picks which trained
    model fills the full-width stage. With `rule_stages` the lightweight and
    rerank stages fall back to the fixed-weight rule models.
    """
    bound = {}
    for spec in config.stages:
        if spec.subset == "lightweight":
            bound[spec.name] = models["rule_lightweight" if rule_stages else "ranksvm_lightweight"]
        elif spec.subset == "rerank":
            bound[spec.name] = models["rule_rerank"] if rule_stages else None
        elif spec.subset == "full":
            bound[spec.name] = models[full_name]
        else:
            raise ConfigError(f"stage {spec.name!r}: no model binding for subset {spec.subset!r}")
    return bound


def rank_queries(
    ctx: FeatureContext,
    config: CascadeConfig,
    stage_models: dict,
    keys,
    jobs: int = 1,
    candidates_by_key: dict | None = None,
) -> tuple:
    """Run the funnel for every (query, segment) key; returns (rankings, rows).

    `rankings` maps key to the ranked pin ids; `rows` are JSONL-ready dicts in
    sorted key order with per-stage counts but no timings. Candidates default
    to the whole corpus; offline evaluation instead passes each group's
    labeled pool so NDCG is read over judged items.
    """
    keys = sorted(keys)
    neutral = neutral_segment(ctx.corpus)

    def one(key):
        qid, sid = key
        if not ctx.corpus.has_query(qid):
            raise DataError(f"unknown query id {qid!r}")
        segment = neutral if sid == "all" else ctx.corpus.segment(sid)
        cand = candidates_by_key.get(key) if candidates_by_key is not None else None
        if candidates_by_key is not None and cand is None:
            raise DataError(f"no candidate pool for query key {key!r}")
        return run_cascade(ctx, config, stage_models, ctx.corpus.query(qid), segment, candidates=cand)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, keys))
    else:
        results = [one(k) for k in keys]

    rankings, rows = {}, []
    for key, res in zip(keys, results):
        rankings[key] = [pid for pid, _ in res.final]
        rows.append(
            {
                "query_id": key[0],
                "segment_id": key[1],
                "items": [{"pin_id": pid, "score": float(s)} for pid, s in res.final],
                "stages": [{"name": n, "n_in": a, "n_out": b} for n, a, b in res.counts()],
            }
        )
    return rankings, rows


def read_ranked(path) -> dict:
    from ..util import read_jsonl

    rankings = {}
    for lineno, obj in read_jsonl(path):
        for fld in ("query_id", "segment_id", "items"):
            if fld not in obj:
                raise DataError(f"{os.fspath(path)}: line {lineno}: missing field {fld!r}")
        rankings[(obj["query_id"], obj["segment_id"])] = [it["pin_id"] for it in obj["items"]]
    return rankings


# ---------------------------------------------------------------- benchmark


def _oracle_funnel(scores_by_stage, keep_tops, tie) -> np.ndarray:
    """Reference funnel: plain python sort per stage, best score first, ties
    to the smaller tie rank."""
    cand = list(range(len(tie)))
    for stage, k in enumerate(keep_tops):
        s = scores_by_stage[stage]
        cand = sorted(cand, key=lambda i: (-float(s[i]), int(tie[i])))[:k]
    return np.asarray(cand, dtype=np.int64)


def bench_roles(models: dict) -> dict:
    """Pick the benchmark's stage models out of the trained set."""
    return {
        "light": models["ranksvm_lightweight"],
        "full": models["stacked"],
        "rerank": models["gbrt_rerank"],
    }


def bench_cascade(ctx: FeatureContext, config: CascadeConfig, roles: dict, bench: dict, seed: int) -> dict:
    """Wall-clock speedup of the funnel against exhaustive full-stage scoring,
    plus simulated latency buckets for rule vs trained first stages.

    `roles` binds the stage models: light, full, rerank. The candidate pool
    tiles corpus rows up to bench.candidates, so timings reflect matrix sizes
    rather than corpus size. Bucket simulation prices stages per item and
    calibrates each first stage's adaptive floor at the same recall of
    planted-relevant candidates, which is what lets a sharper first stage
    pass fewer candidates downstream.
    """
    corpus = ctx.corpus
    keep_tops = [spec.keep_top for spec in config.stages]
    if len(keep_tops) != 3:
        raise ConfigError("benchmark expects a three-stage funnel")
    k1, k2, k3 = keep_tops
    n_cand = int(bench["candidates"])
    reps = int(bench.get("reps", 5))
    n_pins = len(corpus.pins)

    query, segment = corpus.queries[0], corpus.segments[0]
    base_full = ctx.matrix(query, segment, np.arange(n_pins), "full")
    light_idx = ctx.schema.subset_indices("lightweight")
    rerank_idx = ctx.schema.subset_indices("rerank")

    rng = np.random.default_rng(derived_seed(seed, "bench", "wall"))
    rows = rng.integers(0, n_pins, size=n_cand)
    X_full = base_full[rows]
    X_light = np.ascontiguousarray(X_full[:, light_idx])
    X_rerank = np.ascontiguousarray(X_full[:, rerank_idx])
    # sampled rows repeat pins, so break ties by position instead of pin id
    tie = np.arange(n_cand, dtype=np.int64)

    light = roles["light"]
    full = roles["full"]
    rerank = roles["rerank"]

    def cascade_pass():
        s1 = light.score_matrix(X_light)
        o1 = np.lexsort((tie, -s1))[:k1]
        s2 = full.score_matrix(X_full[o1])
        o2 = o1[np.lexsort((tie[o1], -s2))[:k2]]
        s3 = rerank.score_matrix(X_rerank[o2])
        return o2[np.lexsort((tie[o2], -s3))[:k3]]

    def exhaustive_pass():
        s = full.score_matrix(X_full)
        return np.lexsort((tie, -s))[:k3]

    survivors = cascade_pass()
    s1 = light.score_matrix(X_light)
    o1 = _oracle_funnel([s1], [k1], tie)
    s2 = full.score_matrix(X_full[o1])
    o2 = o1[_oracle_funnel([s2], [k2], tie[o1])]
    s3 = rerank.score_matrix(X_rerank[o2])
    oracle = o2[_oracle_funnel([s3], [k3], tie[o2])]
    survivors_match = bool(np.array_equal(survivors, oracle))

    cascade_ms = measure_wall_ms(cascade_pass, runs=reps)
    exhaustive_ms = measure_wall_ms(exhaustive_pass, runs=reps)

    sim = simulated_buckets(ctx, roles, bench, (k1, k2, k3), seed)
    return {
        "wall": {
            "candidates": n_cand,
            "reps": reps,
            "cascade_ms": cascade_ms,
            "exhaustive_ms": exhaustive_ms,
            "speedup": exhaustive_ms / cascade_ms if cascade_ms > 0 else float("inf"),
            "survivors_match_oracle": survivors_match,
        },
        "simulated": sim,
    }


# First-stage baseline for the bucket simulation: context signals only, blind
# to text match and engagement history, so it cannot tell planted-relevant
# pins from pool noise. The trained scorer must beat this to shift buckets.
WEAK_RULE_WEIGHTS = {"freshness": 0.3, "social_score": 0.2, "locale_match": 0.2}


def simulated_buckets(ctx: FeatureContext, roles: dict, bench: dict, keep_tops: tuple, seed: int) -> dict:
    """Latency bucket shares under the per-item cost model.

    Workload pools are lognormal-sized around bench.candidates and drawn
    mostly from each query's non-matching pins, the way a loose candidate
    generator floods the funnel; bench.match_share of the draws come from
    text matches. Planted relevance is the top of the query's utility among
    those matches, the pins the final page should surface. Each first-stage
    scorer gets a floor calibrated to the same planted recall; everything at
    or above the floor pays the full-stage price, so a scorer that separates
    relevant pins sharply passes fewer candidates downstream.
    """
    corpus = ctx.corpus
    n_cand = int(bench["sim_candidates"])
    nq = int(bench["bench_queries"])
    recall = float(bench["relevant_recall"])
    min_keep = int(bench["min_keep"])
    match_share = float(bench["match_share"])
    if nq < 1:
        raise ConfigError("bench_queries must be >= 1")
    if not 0.0 < match_share <= 1.0:
        raise ConfigError("match_share must be in (0, 1]")
    n_pins = len(corpus.pins)
    all_idx = np.arange(n_pins)
    light_names = ctx.schema.subset_names("lightweight")
    full_keep = int(keep_tops[1])

    bm_col = light_names.index("bm25")
    matched_idx, junk_idx, relevant_masks = {}, {}, {}
    for i in range(nq):
        qi = i % len(corpus.queries)
        if qi in relevant_masks:
            continue
        q = corpus.queries[qi]
        matched = np.flatnonzero(
            ctx.matrix(q, corpus.segments[0], all_idx, "lightweight")[:, bm_col] > 0
        )
        if len(matched) == 0 or len(matched) == n_pins:
            matched = all_idx
            junk = all_idx
        else:
            junk = np.setdiff1d(all_idx, matched, assume_unique=True)
        matched_idx[qi], junk_idx[qi] = matched, junk
        util = corpus.utility[q.query_id]
        top = matched[np.argsort(-util[matched], kind="stable")[: min(25, max(1, len(matched) // 4))]]
        mask = np.zeros(n_pins, dtype=bool)
        mask[top] = True
        relevant_masks[qi] = mask

    def workload(i: int):
        rng = np.random.default_rng(derived_seed(seed, "bench", "workload", i))
        # -sigma^2/2 keeps the mean near n_cand; clamp away degenerate pools
        n1 = int(np.clip(rng.lognormal(np.log(n_cand) - 0.125, 0.5), 2 * min_keep, 6 * n_cand))
        qi = i % len(corpus.queries)
        si = (i // len(corpus.queries)) % len(corpus.segments)
        matched, junk = matched_idx[qi], junk_idx[qi]
        from_match = rng.random(n1) < match_share
        cand = junk[rng.integers(0, len(junk), size=n1)]
        n_match = int(np.count_nonzero(from_match))
        cand[from_match] = matched[rng.integers(0, len(matched), size=n_match)]
        return qi, si, cand

    weak_rule = make_rule_model(light_names, weights=WEAK_RULE_WEIGHTS, fresh_boost=0.2)
    shares, floors = {}, {}
    for name, model in (("rule", weak_rule), ("ranksvm", roles["light"])):
        pin_scores = {}

        def scores_for(qi: int, si: int, model=model, pin_scores=pin_scores):
            if (qi, si) not in pin_scores:
                X = ctx.matrix(corpus.queries[qi], corpus.segments[si], all_idx, "lightweight")
                pin_scores[(qi, si)] = model.score_matrix(X)
            return pin_scores[(qi, si)]

        def query_scores(i: int, scores_for=scores_for):
            qi, si, cand = workload(i)
            return qi, scores_for(qi, si)[cand], cand

        # score scales differ per query, so each query calibrates its own floor
        pool: dict = {}
        for i in range(nq):
            qi, s, cand = query_scores(i)
            pool.setdefault(qi, []).append(s[relevant_masks[qi][cand]])
        floor_by_query = {
            qi: calibrate_floor(np.concatenate(chunks), 1.0 - recall)
            for qi, chunks in pool.items()
        }
        lat = []
        for i in range(nq):
            qi, s, _ = query_scores(i)
            lat.extend(
                simulate_funnel_latencies([s], floor_by_query[qi], full_keep=full_keep, min_keep=min_keep)
            )
        shares[name] = bucket_shares(lat)
        fl = sorted(floor_by_query.values())
        floors[name] = {
            "median": fl[len(fl) // 2],
            "min": fl[0],
            "max": fl[-1],
        }

    return {
        "queries": nq,
        "sim_candidates": n_cand,
        "relevant_recall": recall,
        "match_share": match_share,
        "min_keep": min_keep,
        "full_keep": full_keep,
        "weak_rule_weights": dict(WEAK_RULE_WEIGHTS),
        "unit_cost_ms": dict(STAGE_UNIT_COST_MS),
        "floors": floors,
        "shares": shares,
        "reference_shares": {k: dict(v) for k, v in REFERENCE_BUCKET_SHARES.items()},
        "slow_share_drop": shares["rule"][">200ms"] - shares["ranksvm"][">200ms"],
    }


# ---------------------------------------------------------------- reproduce


def _run_stage(name: str, fn, timings: dict):
    t0 = time.perf_counter()
    try:
        return fn()
    except CascadeRankError as e:
        raise type(e)(f"stage {name}: {e}") from e
    except Exception as e:
        raise CascadeRankError(f"stage {name}: {e!r}") from e
    finally:
        timings[name] = (time.perf_counter() - t0) * 1000.0


def _summary_csv(path, summary: dict) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model", "metric", "value"])
        for model in sorted(summary["models"]):
            for metric, value in summary["models"][model].items():
                writer.writerow([model, metric, "" if value is None else repr(float(value))])


def run_reproduce(config: ExperimentConfig, out_dir, jobs: int = 1) -> dict:
    """The whole experiment: generate, simulate, label, featurize, train,
    stack, rank, evaluate, benchmark; returns the summary dict.

    Artifacts land under out_dir; all JSON except timings.json and
    bench/latency.json (wall numbers) is byte-stable across reruns.
    """
    config.validate()
    seed = config.seed
    ensure_dir(out_dir)
    paths = {
        "corpus": os.path.join(out_dir, "corpus"),
        "log": os.path.join(out_dir, "log.jsonl"),
        "labels": os.path.join(out_dir, "labels"),
        "features": os.path.join(out_dir, "features"),
        "models": os.path.join(out_dir, "models"),
        "ranked": os.path.join(out_dir, "ranked"),
        "eval": os.path.join(out_dir, "eval"),
        "bench": os.path.join(out_dir, "bench"),
        "figures": os.path.join(out_dir, "figures"),
    }
    timings: dict = {}
    write_json(os.path.join(out_dir, "config_resolved.json"), config.to_dict(), indent=2)

    def gen():
        corpus = generate_corpus(
            seed=seed,
            n_pins=int(config.corpus["pins"]),
            n_queries=int(config.corpus["queries"]),
            n_segments=int(config.corpus["segments"]),
            judgments_per_query=int(config.corpus["judgments_per_query"]),
        )
        write_corpus(corpus, paths["corpus"])
        return corpus

    corpus = _run_stage("gen", gen, timings)

    def simlog():
        records = simulate_log(
            corpus,
            n_sessions=int(config.simlog["sessions"]),
            position_bias=float(config.simlog["position_bias"]),
            seed=derived_seed(seed, "simlog"),
        )
        write_log(paths["log"], records)
        return records

    records = _run_stage("simlog", simlog, timings)

    def labels():
        arts = build_labels(records, corpus.judgments, config.labels, derived_seed(seed, "labels"))
        write_label_artifacts(
            arts,
            paths["labels"],
            sources={"corpus": paths["corpus"], "log": paths["log"]},
        )
        holdout = [
            r for r in records if arts.assignment["engagement"].get((r.query_id, r.segment_id)) == "test"
        ]
        write_log(os.path.join(out_dir, "holdout.jsonl"), holdout)
        return arts, holdout

    arts, holdout = _run_stage("labels", labels, timings)

    def features():
        ctx = build_context(corpus, records, arts.assignment["engagement"])
        datasets = make_datasets(arts, corpus, ctx, seed)
        write_feature_artifacts(datasets, ctx, paths["features"])
        return ctx, datasets

    ctx, datasets = _run_stage("features", features, timings)

    def train():
        models = train_step_models(datasets, config.models, seed)
        ensure_dir(paths["models"])
        for name in sorted(models):
            save_model(models[name], os.path.join(paths["models"], f"{name}.json"))
        curves = {
            name: models[name].training["loss_curve"]
            for name in sorted(models)
            if models[name].training.get("loss_curve")
        }
        ensure_dir(paths["figures"])
        loss_curves(curves, os.path.join(paths["figures"], "loss_curves.png"))
        return models

    models = _run_stage("train", train, timings)

    def stack():
        booster, details = train_stack_step(datasets, config.stack, seed)
        stacked = StackedModel(booster, models["gbrt_relevance"], gamma=details["gamma"])
        save_model(stacked, os.path.join(paths["models"], "stacked.json"))
        return stacked, details

    stacked, stack_details = _run_stage("stack", stack, timings)
    models["stacked"] = stacked

    variants = [*TRAINED_KINDS, "stacked", RULE_STAGES_VARIANT]

    def rank():
        ensure_dir(paths["ranked"])
        keys = arts.group_keys("engagement", "test")
        if not keys:
            raise DataError("engagement test split has no groups to rank")
        # Judged-pool protocol: each group ranks its labeled candidates (its
        # engagement labels plus the query's relevance labels) so NDCG is read
        # over judged items. Full-corpus retrieval is the bench's job.
        pools = {key: set() for key in keys}
        for inst in arts.engagement["test"]:
            pools[inst.group_key].add(inst.pin_id)
        rel_pool: dict = {}
        for inst in arts.relevance["test"]:
            rel_pool.setdefault(inst.query_id, set()).add(inst.pin_id)
        candidates_by_key = {
            (qid, sid): np.array(
                sorted(corpus.pin_idx(pid) for pid in pools[(qid, sid)] | rel_pool.get(qid, set())),
                dtype=np.int64,
            )
            for qid, sid in keys
        }
        rankings = {}
        for variant in variants:
            rule_stages = variant == RULE_STAGES_VARIANT
            full_name = "stacked" if rule_stages else variant
            bound = stage_model_bindings(config.cascade, models, full_name, rule_stages=rule_stages)
            ranked, rows = rank_queries(
                ctx, config.cascade, bound, keys, jobs=jobs, candidates_by_key=candidates_by_key
            )
            rankings[variant] = ranked
            write_jsonl(os.path.join(paths["ranked"], f"{variant}.jsonl"), rows)
        return rankings

    rankings = _run_stage("rank", rank, timings)

    def evaluate():
        ensure_dir(paths["eval"])
        ensure_dir(paths["figures"])
        eng_labels = arts.label_map("engagement", "test")
        rel_labels = arts.label_map("relevance", "test")
        cutoffs = tuple(int(p) for p in config.eval["cutoffs"])
        k = int(config.eval["k"])
        reports = {}
        for variant in variants:
            report = build_report(
                variant, rankings[variant], eng_labels, rel_labels, holdout, corpus, cutoffs=cutoffs, k=k
            )
            reports[variant] = report
            write_report(
                report,
                os.path.join(paths["eval"], f"report_{variant}.json"),
                os.path.join(paths["eval"], f"report_{variant}.csv"),
            )
        metric_bars(reports["stacked"], os.path.join(paths["figures"], "metrics_stacked.png"))
        comparisons = {}
        for variant in variants:
            if variant == BASELINE_VARIANT:
                continue
            table = compare(reports[BASELINE_VARIANT], reports[variant])
            pair = (BASELINE_VARIANT, variant)
            comparisons[f"{variant}_vs_{BASELINE_VARIANT}"] = table
            write_comparison(
                table,
                pair,
                os.path.join(paths["eval"], f"compare_{variant}_vs_{BASELINE_VARIANT}.json"),
                os.path.join(paths["eval"], f"compare_{variant}_vs_{BASELINE_VARIANT}.csv"),
            )
            comparison_bars(
                table,
                f"{variant} vs {BASELINE_VARIANT}",
                os.path.join(paths["figures"], f"compare_{variant}_vs_{BASELINE_VARIANT}.png"),
            )
        rule_table = compare(reports[RULE_STAGES_VARIANT], reports["stacked"])
        comparisons["stacked_vs_rule_stages"] = rule_table
        write_comparison(
            rule_table,
            (RULE_STAGES_VARIANT, "stacked"),
            os.path.join(paths["eval"], "compare_stacked_vs_rule_stages.json"),
            os.path.join(paths["eval"], "compare_stacked_vs_rule_stages.csv"),
        )
        return reports, comparisons

    reports, comparisons = _run_stage("eval", evaluate, timings)

    def bench():
        ensure_dir(paths["bench"])
        result = bench_cascade(ctx, config.cascade, bench_roles(models), config.bench, seed)
        write_json(os.path.join(paths["bench"], "latency.json"), result, indent=2)
        sim = result["simulated"]
        latency_buckets(
            {
                "rule (simulated)": sim["shares"]["rule"],
                "ranksvm (simulated)": sim["shares"]["ranksvm"],
                "rule (reference)": sim["reference_shares"]["rule"],
                "ranksvm (reference)": sim["reference_shares"]["ranksvm"],
            },
            os.path.join(paths["figures"], "latency_buckets.png"),
        )
        return result

    bench_result = _run_stage("bench", bench, timings)

    def summarize():
        summary = {
            "seed": seed,
            "baseline": BASELINE_VARIANT,
            "stack": stack_details,
            "models": {name: reports[name].flat_metrics() for name in variants},
            "comparisons": comparisons,
            "bench_simulated": bench_result["simulated"],
            "survivors_match_oracle": bench_result["wall"]["survivors_match_oracle"],
            "artifacts": {name: os.path.basename(p) for name, p in sorted(paths.items())},
        }
        write_json(os.path.join(out_dir, "summary.json"), summary, indent=2)
        _summary_csv(os.path.join(out_dir, "summary.csv"), summary)
        return summary

    summary = _run_stage("summary", summarize, timings)
    write_json(os.path.join(out_dir, "timings.json"), {k: round(v, 3) for k, v in timings.items()}, indent=2)
    return summary
