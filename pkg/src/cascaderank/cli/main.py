"""Command line entry point.

Subcommands mirror the pipeline stages, so the whole experiment can run as
one `reproduce` or as individual steps wired together by files. Every
subcommand accepts --seed, --out, and --config; the CASCADERANK_CONFIG
environment variable overrides the config path and nothing else. Exit codes:
0 ok, 1 unexpected pipeline failure, 2 bad configuration, 3 bad data, 4
numerical failure during training.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from ..cascade import CascadeConfig, RerankPolicy, StageSpec
from ..ensemble import StackedModel
from ..errors import CascadeRankError, ConfigError, DataError
from ..evalkit import (
    build_report,
    compare,
    comparison_bars,
    latency_buckets,
    metric_bars,
    write_comparison,
    write_report,
)
from ..featurize import FeatureContext, NavboostTable, build_corpus_stats, default_schema
from ..labelgen import LabelConfig, group_instances
from ..rankmodels import build_dataset, load_model, make_rule_model, neutral_segment, save_model
from ..synthlog import generate_corpus, read_corpus, read_judgments, read_log, simulate_log, write_corpus, write_log
from ..util import derived_seed, ensure_dir, read_json, read_jsonl, write_jsonl, write_json
from .experiment import DEFAULT_BENCH, DEFAULT_MODEL_HYPER, TRAINED_KINDS, ExperimentConfig
from .pipeline import (
    bench_cascade,
    build_context,
    build_labels,
    rank_queries,
    read_label_artifacts,
    read_label_sources,
    read_ranked,
    run_reproduce,
    train_model,
    train_stack_step,
    make_datasets,
    write_label_artifacts,
)

# training flags forwarded to the per-kind trainers; names match the
# trainer keyword arguments after dash-to-underscore translation
_HYPER_FLAGS = (
    ("--trees", int),
    ("--learning-rate", float),
    ("--max-depth", int),
    ("--min-leaf", int),
    ("--margin", float),
    ("--cost", float),
    ("--epochs", int),
    ("--step", float),
    ("--batch-size", int),
    ("--decay", float),
    ("--hidden", str),
    ("--conv-channels", str),
    ("--conv-width", int),
    ("--pool", int),
    ("--fc-hidden", int),
)

_SGD_KINDS = ("ranknet", "dnn", "cnn")


def _config_path(args) -> str | None:
    return os.environ.get("CASCADERANK_CONFIG") or args.config


def _require(value, flag: str):
    if value is None:
        raise ConfigError(f"{flag} is required for this subcommand")
    return value


def _seed(args, default: int = 0) -> int:
    return default if args.seed is None else int(args.seed)


def _load_experiment(args) -> ExperimentConfig:
    path = _config_path(args)
    if path:
        config = ExperimentConfig.from_dict(read_json(path))
        if args.seed is not None:
            config.seed = int(args.seed)
        return config
    return ExperimentConfig(seed=_seed(args))


def _feature_context(corpus, navboost_path: str | None) -> FeatureContext:
    table = NavboostTable.from_dict(read_json(navboost_path)) if navboost_path else NavboostTable()
    return FeatureContext(corpus, build_corpus_stats(corpus.pins), table, default_schema())


def _resolve_cascade(path: str) -> tuple:
    """Cascade config plus stage models from its model_ref entries.

    A ref of "rule" builds the fixed-weight model for the stage subset; a
    missing ref is allowed only on a rerank stage (score passthrough).
    Relative paths resolve against the config file's directory.
    """
    config = CascadeConfig.from_dict(read_json(path))
    base = os.path.dirname(os.path.abspath(path))
    schema = default_schema()
    models = {}
    for spec in config.stages:
        ref = spec.model_ref
        if ref is None:
            if spec.kind != "rerank":
                raise ConfigError(f"stage {spec.name!r} needs a model_ref")
            models[spec.name] = None
        elif ref == "rule":
            models[spec.name] = make_rule_model(schema.subset_names(spec.subset), subset=spec.subset)
        else:
            full = ref if os.path.isabs(ref) else os.path.join(base, ref)
            models[spec.name] = load_model(full)
    return config, models


def _load_workspace(labels_dir: str):
    """Corpus, log, label artifacts, and feature context from a labels dir."""
    sources = read_label_sources(labels_dir)
    if "corpus" not in sources:
        raise DataError(f"{labels_dir}: sources.json records no corpus path")
    corpus = read_corpus(sources["corpus"])
    records = read_log(sources["log"])
    arts = read_label_artifacts(labels_dir)
    ctx = build_context(corpus, records, arts.assignment["engagement"])
    return corpus, records, arts, ctx


# ------------------------------------------------------------ subcommands


def cmd_gen(args) -> int:
    out = _require(args.out, "--out")
    corpus = generate_corpus(
        seed=_seed(args),
        n_pins=args.pins,
        n_queries=args.queries,
        n_segments=args.segments,
        judgments_per_query=args.judgments,
        raters=args.raters,
    )
    write_corpus(corpus, out)
    print(f"wrote corpus: {len(corpus.pins)} pins, {len(corpus.queries)} queries, "
          f"{len(corpus.segments)} segments -> {out}")
    return 0


def cmd_simlog(args) -> int:
    out = _require(args.out, "--out")
    corpus = read_corpus(args.corpus, need_utility=True)
    records = simulate_log(
        corpus,
        n_sessions=args.sessions,
        position_bias=args.pos_bias,
        seed=_seed(args),
    )
    n = write_log(out, records)
    print(f"wrote {n} impressions -> {out}")
    return 0


def cmd_labels(args) -> int:
    out = _require(args.out, "--out")
    records = read_log(args.log)
    judgments = read_judgments(args.judgments)
    cfg_path = _config_path(args)
    if cfg_path:
        raw = read_json(cfg_path)
        config = LabelConfig.from_dict(raw.get("labels", raw))
    else:
        config = LabelConfig()
    arts = build_labels(records, judgments, config, _seed(args))
    sources = {"log": args.log, "judgments": args.judgments}
    if args.corpus:
        sources["corpus"] = args.corpus
    write_label_artifacts(arts, out, sources=sources)
    counts = {s: len(arts.engagement[s]) for s in ("train", "test", "valid")}
    print(f"engagement instances per split: {counts}; cuts: {[round(c, 6) for c in arts.cuts]} -> {out}")
    return 0


def _parse_int_list(text: str, flag: str) -> list:
    try:
        return [int(part) for part in text.split(",") if part != ""]
    except ValueError as e:
        raise ConfigError(f"{flag} expects comma-separated integers, got {text!r}") from e


def _hyper_from_flags(kind: str, args) -> dict:
    allowed = set(DEFAULT_MODEL_HYPER[kind])
    if kind in _SGD_KINDS:
        allowed.add("decay")
    hyper = dict(DEFAULT_MODEL_HYPER[kind])
    for flag, _ in _HYPER_FLAGS:
        name = flag.lstrip("-").replace("-", "_")
        value = getattr(args, name, None)
        if value is None:
            continue
        if name not in allowed:
            raise ConfigError(
                f"{flag} does not apply to model kind {kind!r}; allowed: {', '.join(sorted(allowed))}"
            )
        if name == "hidden":
            vals = _parse_int_list(value, flag)
            hyper[name] = vals[0] if kind == "ranknet" else vals
        elif name == "conv_channels":
            hyper[name] = _parse_int_list(value, flag)
        else:
            hyper[name] = value
    return hyper


def cmd_train(args) -> int:
    out = _require(args.out, "--out")
    kind = args.model
    if kind in ("dnn", "cnn") and args.source != "engagement":
        raise ConfigError("classifier kinds train on engagement ordinals; use --source engagement")
    corpus, _, arts, ctx = _load_workspace(args.data)
    groups = group_instances(getattr(arts, args.source)["train"])
    if not groups:
        raise DataError(f"{args.source} training split is empty")
    seed = _seed(args)
    ds = build_dataset(
        groups,
        corpus,
        ctx,
        arts.config,
        derived_seed(seed, "ds", args.source, "train"),
        subset=args.subset,
        source=args.source,
        with_ordinals=(args.source == "engagement"),
    )
    hyper = _hyper_from_flags(kind, args)
    model = train_model(kind, ds, hyper, derived_seed(seed, "train", kind))
    save_model(model, out)
    curve = model.training.get("loss_curve") or [float("nan")]
    print(f"trained {kind} on {ds.n_rows} rows ({len(ds.pairs)} pairs); "
          f"final loss {curve[-1]:.6g} -> {out}")
    return 0


def cmd_stack(args) -> int:
    out = _require(args.out, "--out")
    model = StackedModel(load_model(args.eng), load_model(args.rel), gamma=args.gamma)
    save_model(model, out)
    print(f"stacked gamma={args.gamma} -> {out}")
    return 0


def cmd_stack_train(args) -> int:
    out = _require(args.out, "--out")
    corpus, _, arts, ctx = _load_workspace(args.data)
    seed = _seed(args)
    datasets = make_datasets(arts, corpus, ctx, seed)
    gamma = None if args.gamma.lower() == "none" else float(args.gamma)
    stack_cfg = {"gamma": gamma, "trees": args.trees, "mode": args.mode}
    booster, details = train_stack_step(datasets, stack_cfg, seed)
    relevance = train_model(
        "gbrt",
        datasets[("relevance", "train")],
        DEFAULT_MODEL_HYPER["gbrt"],
        derived_seed(seed, "train", "gbrt", "relevance"),
    )
    save_model(StackedModel(booster, relevance, gamma=details["gamma"]), out)
    if details["table"]:
        for row in details["table"]:
            print(f"gamma={row['gamma']:.2f} engagement={row['engagement']:.4f} "
                  f"relevance={row['relevance']:.4f} blend={row['blend']:.4f}")
    print(f"selected gamma={details['gamma']} -> {out}")
    return 0


def _read_query_keys(path) -> list:
    keys = []
    for lineno, obj in read_jsonl(path):
        if "query_id" not in obj:
            raise DataError(f"{os.fspath(path)}: line {lineno}: missing field 'query_id'")
        keys.append((obj["query_id"], obj.get("segment_id", "all")))
    if not keys:
        raise DataError(f"{os.fspath(path)}: no queries")
    return keys


def cmd_rank(args) -> int:
    out = _require(args.out, "--out")
    config, models = _resolve_cascade(args.cascade)
    corpus = read_corpus(args.corpus)
    ctx = _feature_context(corpus, args.navboost)
    keys = _read_query_keys(args.queries)
    _, rows = rank_queries(ctx, config, models, keys, jobs=max(1, args.jobs))
    write_jsonl(out, rows)
    print(f"ranked {len(rows)} queries -> {out}")
    return 0


def cmd_rerank(args) -> int:
    out = _require(args.out, "--out")
    corpus = read_corpus(args.corpus)
    ctx = _feature_context(corpus, args.navboost)
    policy = RerankPolicy.from_dict(read_json(args.policy))
    neutral = neutral_segment(corpus)
    rows_out = []
    from ..cascade import rerank_stage

    for lineno, obj in read_jsonl(args.ranked):
        items = obj.get("items")
        if not items:
            raise DataError(f"{args.ranked}: line {lineno}: no items to rerank")
        qid, sid = obj["query_id"], obj["segment_id"]
        if not corpus.has_query(qid):
            raise DataError(f"{args.ranked}: line {lineno}: unknown query {qid!r}")
        segment = neutral if sid == "all" else corpus.segment(sid)
        cand = np.array([corpus.pin_idx(it["pin_id"]) for it in items], dtype=np.int64)
        incoming = np.array([float(it["score"]) for it in items])
        keep = args.keep if args.keep is not None else len(items)
        spec = StageSpec(name="rerank", subset="rerank", keep_top=keep, kind="rerank")
        idx, scores, sims = rerank_stage(
            ctx, spec, None, corpus.query(qid), segment, cand, incoming, policy
        )
        rows_out.append(
            {
                "query_id": qid,
                "segment_id": sid,
                "items": [
                    {
                        "pin_id": corpus.pins[int(i)].pin_id,
                        "score": float(s),
                        "max_similarity": float(m),
                    }
                    for i, s, m in zip(idx, scores, sims)
                ],
            }
        )
    write_jsonl(out, rows_out)
    print(f"reranked {len(rows_out)} queries -> {out}")
    return 0


def cmd_eval(args) -> int:
    out = _require(args.out, "--out")
    ensure_dir(out)
    rankings = read_ranked(args.ranked)
    arts = read_label_artifacts(args.labels)
    sources = read_label_sources(args.labels)
    if "corpus" not in sources:
        raise DataError(f"{args.labels}: sources.json records no corpus path")
    corpus = read_corpus(sources["corpus"])
    holdout = read_log(args.holdout)
    exp = _load_experiment(args) if _config_path(args) else None
    cutoffs = tuple(int(p) for p in (exp.eval["cutoffs"] if exp else (5, 10, 20)))
    k = int(exp.eval["k"]) if exp else 25
    name = os.path.splitext(os.path.basename(args.ranked))[0]
    report = build_report(
        name,
        rankings,
        arts.label_map("engagement", args.split),
        arts.label_map("relevance", args.split),
        holdout,
        corpus,
        cutoffs=cutoffs,
        k=k,
    )
    write_report(
        report,
        os.path.join(out, f"report_{name}.json"),
        os.path.join(out, f"report_{name}.csv"),
    )
    metric_bars(report, os.path.join(out, f"metrics_{name}.png"))
    if args.baseline:
        base_name = os.path.splitext(os.path.basename(args.baseline))[0]
        base_report = build_report(
            base_name,
            read_ranked(args.baseline),
            arts.label_map("engagement", args.split),
            arts.label_map("relevance", args.split),
            holdout,
            corpus,
            cutoffs=cutoffs,
            k=k,
        )
        table = compare(base_report, report)
        write_comparison(
            table,
            (base_name, name),
            os.path.join(out, f"compare_{name}_vs_{base_name}.json"),
            os.path.join(out, f"compare_{name}_vs_{base_name}.csv"),
        )
        comparison_bars(table, f"{name} vs {base_name}",
                        os.path.join(out, f"compare_{name}_vs_{base_name}.png"))
    flat = report.flat_metrics()
    shown = {m: flat[m] for m in sorted(flat) if flat[m] is not None}
    print(f"report for {name}: " + ", ".join(f"{m}={v:.4f}" for m, v in shown.items()))
    return 0


def cmd_bench(args) -> int:
    out = _require(args.out, "--out")
    config, stage_models = _resolve_cascade(args.cascade)
    corpus = read_corpus(args.corpus, need_utility=True)
    ctx = _feature_context(corpus, args.navboost)
    schema = default_schema()
    roles = {}
    for spec in config.stages:
        if spec.subset == "lightweight":
            roles["light"] = stage_models[spec.name]
        elif spec.subset == "full":
            roles["full"] = stage_models[spec.name]
        elif spec.subset == "rerank":
            roles["rerank"] = stage_models[spec.name] or make_rule_model(
                schema.subset_names("rerank"), subset="rerank"
            )
    for role in ("light", "full", "rerank"):
        if role not in roles:
            raise ConfigError(f"cascade config binds no {role} stage for the benchmark")
    exp = _load_experiment(args) if _config_path(args) else None
    bench = dict(exp.bench if exp else DEFAULT_BENCH)
    if args.reps is not None:
        bench["reps"] = args.reps
    if args.candidates is not None:
        bench["candidates"] = args.candidates
    result = bench_cascade(ctx, config, roles, bench, _seed(args))
    write_json(out, result, indent=2)

    out_dir = os.path.dirname(os.path.abspath(out))
    sim = result["simulated"]
    shares = {
        "rule (simulated)": sim["shares"]["rule"],
        "ranksvm (simulated)": sim["shares"]["ranksvm"],
        "rule (reference)": sim["reference_shares"]["rule"],
        "ranksvm (reference)": sim["reference_shares"]["ranksvm"],
    }
    latency_buckets(shares, os.path.join(out_dir, "latency_buckets.png"))
    import csv

    with open(os.path.join(out_dir, "latency_buckets.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["config", "bucket", "share_percent"])
        for cfg_name, by_bucket in shares.items():
            for bucket, share in by_bucket.items():
                writer.writerow([cfg_name, bucket, repr(float(share))])
    wall = result["wall"]
    print(f"cascade {wall['cascade_ms']:.2f} ms vs exhaustive {wall['exhaustive_ms']:.2f} ms "
          f"(speedup {wall['speedup']:.1f}x, survivors match: {wall['survivors_match_oracle']}) -> {out}")
    return 0


def cmd_reproduce(args) -> int:
    out = _require(args.out, "--out")
    config = _load_experiment(args)
    summary = run_reproduce(config, out, jobs=max(1, args.jobs))
    stacked = summary["models"].get("stacked", {})
    headline = {m: stacked[m] for m in ("ndcg_e@10", "ndcg_r@10") if stacked.get(m) is not None}
    print(f"reproduce done: gamma={summary['stack']['gamma']}, "
          + ", ".join(f"stacked {m}={v:.4f}" for m, v in headline.items())
          + f", summary -> {os.path.join(out, 'summary.json')}")
    return 0


def cmd_validate(args) -> int:
    path = _config_path(args)
    if not path:
        raise ConfigError("validate needs --config (or CASCADERANK_CONFIG)")
    config = ExperimentConfig.from_dict(read_json(path))
    issues = config.diagnostics()
    if issues:
        for issue in issues:
            print(issue)
        return 2
    print("ok")
    return 0


# ------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cascaderank",
        description="Cascading learning-to-rank for image search: synthetic logs, "
        "label generation, six ranking models, stacking, and a staged funnel.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="base random seed (default 0)")
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("--config", default=None,
                        help="experiment config JSON; CASCADERANK_CONFIG overrides this path")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--pins", type=int, default=1200)
    p.add_argument("--queries", type=int, default=40)
    p.add_argument("--segments", type=int, default=8)
    p.add_argument("--judgments", type=int, default=40, help="rated pins per query")
    p.add_argument("--raters", type=int, default=3)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("simlog", parents=[common], help="simulate an engagement log")
    p.add_argument("--corpus", required=True)
    p.add_argument("--sessions", type=int, default=9000)
    p.add_argument("--pos-bias", type=float, default=1.0, dest="pos_bias")
    p.set_defaults(func=cmd_simlog)

    p = sub.add_parser("labels", parents=[common], help="build labeled training splits")
    p.add_argument("--log", required=True)
    p.add_argument("--judgments", required=True)
    p.add_argument("--corpus", default=None, help="corpus dir recorded for later steps")
    p.set_defaults(func=cmd_labels)

    p = sub.add_parser("train", parents=[common], help="train one ranking model")
    p.add_argument("--model", required=True, choices=TRAINED_KINDS)
    p.add_argument("--data", required=True, help="labels directory (from the labels subcommand)")
    p.add_argument("--source", default="engagement", choices=("engagement", "relevance"))
    p.add_argument("--subset", default="full", choices=("full", "lightweight", "rerank"))
    for flag, typ in _HYPER_FLAGS:
        p.add_argument(flag, type=typ, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("stack", parents=[common], help="blend two trained models")
    p.add_argument("--eng", required=True, help="engagement model file")
    p.add_argument("--rel", required=True, help="relevance model file")
    p.add_argument("--gamma", type=float, required=True)
    p.set_defaults(func=cmd_stack)

    p = sub.add_parser("stack-train", parents=[common],
                       help="train the two-source booster, optionally selecting gamma")
    p.add_argument("--data", required=True)
    p.add_argument("--gamma", default="none", help="fixed gamma in [0,1], or 'none' to grid-select")
    p.add_argument("--trees", type=int, default=30)
    p.add_argument("--mode", default="pairwise", choices=("pairwise", "mixed_pointwise"))
    p.set_defaults(func=cmd_stack_train)

    p = sub.add_parser("rank", parents=[common], help="run the cascade for a query file")
    p.add_argument("--cascade", required=True, help="cascade config JSON with model_ref entries")
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True, help="JSONL with query_id and segment_id")
    p.add_argument("--navboost", default=None, help="navboost table JSON (default: prior only)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("rerank", parents=[common], help="apply a rerank policy to a ranked file")
    p.add_argument("--ranked", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--policy", required=True, help="rerank policy JSON")
    p.add_argument("--navboost", default=None)
    p.add_argument("--keep", type=int, default=None)
    p.set_defaults(func=cmd_rerank)

    p = sub.add_parser("eval", parents=[common], help="score a ranked file against labels")
    p.add_argument("--ranked", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--holdout", required=True, help="held-out engagement log for replay")
    p.add_argument("--baseline", default=None, help="second ranked file to compare against")
    p.add_argument("--split", default="test", choices=("train", "test", "valid"))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", parents=[common], help="latency: wall speedup and simulated buckets")
    p.add_argument("--cascade", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--navboost", default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--candidates", type=int, default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("reproduce", parents=[common],
                       help="run the full experiment: gen, simlog, labels, train, stack, rank, eval, bench")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("validate", parents=[common], help="check an experiment config")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CascadeRankError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except (FileNotFoundError, NotADirectoryError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
