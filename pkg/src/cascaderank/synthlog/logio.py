"""Corpus and engagement-log persistence.

Logs are JSON lines, one EngagementRecord per line, UTF-8. The corpus is a
directory of JSONL files plus a meta.json; the planted utility lives in its
own file so evaluators can load it while feature extraction never sees it.
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import DataError
from ..util import read_json, read_jsonl, write_json, write_jsonl, ensure_dir
from .types import (
    ACTION_NAMES,
    Corpus,
    EngagementRecord,
    Pin,
    Query,
    RelevanceJudgment,
    UserSegment,
    validate_record,
)


def write_log(path, records) -> int:
    """Write engagement records as JSONL; returns the number of lines."""
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        from ..util import canonical_dumps

        for rec in records:
            fh.write(canonical_dumps(rec.to_dict()))
            fh.write("\n")
            n += 1
    return n


def read_log(path, allowed_actions=ACTION_NAMES) -> list[EngagementRecord]:
    """Read a JSONL engagement log; malformed lines raise DataError with the
    offending line number."""
    records = []
    for lineno, obj in read_jsonl(path):
        records.append(validate_record(obj, lineno, os.fspath(path), allowed_actions))
    return records


def write_corpus(corpus: Corpus, out_dir) -> None:
    ensure_dir(out_dir)
    write_jsonl(os.path.join(out_dir, "pins.jsonl"), (p.to_dict() for p in corpus.pins))
    write_jsonl(os.path.join(out_dir, "queries.jsonl"), (q.to_dict() for q in corpus.queries))
    write_jsonl(os.path.join(out_dir, "segments.jsonl"), (s.to_dict() for s in corpus.segments))
    write_json(
        os.path.join(out_dir, "meta.json"),
        {
            "seed": corpus.seed,
            "dims": {"categories": corpus.dims[0], "topics": corpus.dims[1], "latent": corpus.dims[2]},
            "n_pins": len(corpus.pins),
            "n_queries": len(corpus.queries),
            "n_segments": len(corpus.segments),
        },
    )
    if corpus.utility:
        write_jsonl(
            os.path.join(out_dir, "utility.jsonl"),
            (
                {"query_id": q.query_id, "values": [float(v) for v in corpus.utility[q.query_id]]}
                for q in corpus.queries
            ),
        )
    if corpus.judgments:
        write_jsonl(os.path.join(out_dir, "judgments.jsonl"), (j.to_dict() for j in corpus.judgments))


def read_corpus(in_dir, need_utility: bool = False) -> Corpus:
    meta_path = os.path.join(in_dir, "meta.json")
    if not os.path.exists(meta_path):
        raise DataError(f"{in_dir}: not a corpus directory (meta.json missing)")
    meta = read_json(meta_path)
    pins = [Pin.from_dict(obj) for _, obj in read_jsonl(os.path.join(in_dir, "pins.jsonl"))]
    queries = [Query.from_dict(obj) for _, obj in read_jsonl(os.path.join(in_dir, "queries.jsonl"))]
    segments = [UserSegment.from_dict(obj) for _, obj in read_jsonl(os.path.join(in_dir, "segments.jsonl"))]
    if not pins or not queries or not segments:
        raise DataError(f"{in_dir}: corpus must contain at least one pin, query, and segment")
    dims = (meta["dims"]["categories"], meta["dims"]["topics"], meta["dims"]["latent"])
    corpus = Corpus(pins=pins, queries=queries, segments=segments, dims=dims, seed=int(meta["seed"]))

    utility_path = os.path.join(in_dir, "utility.jsonl")
    if os.path.exists(utility_path):
        n = len(pins)
        for lineno, obj in read_jsonl(utility_path):
            values = np.asarray(obj["values"], dtype=np.float64)
            if values.shape != (n,):
                raise DataError(f"{utility_path}: line {lineno}: expected {n} utility values")
            corpus.utility[obj["query_id"]] = values
    elif need_utility:
        raise DataError(f"{in_dir}: utility.jsonl missing but required")

    judgments_path = os.path.join(in_dir, "judgments.jsonl")
    if os.path.exists(judgments_path):
        corpus.judgments = [RelevanceJudgment.from_dict(obj) for _, obj in read_jsonl(judgments_path)]
    return corpus


def read_judgments(path) -> list[RelevanceJudgment]:
    out = []
    for lineno, obj in read_jsonl(path):
        for key in ("query_id", "pin_id", "ratings"):
            if key not in obj:
                raise DataError(f"{os.fspath(path)}: line {lineno}: missing field '{key}'")
        out.append(RelevanceJudgment.from_dict(obj))
    return out
