"""Feature-matrix assembly for training and evaluation.

Bridges labeled instances to the model contract: one row per instance in a
stable group order, preference pairs indexed into those rows, and optional
ordinal labels. Relevance groups carry segment id "all"; they are featurized
against a neutral segment so no personalization signal leaks into them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError
from ..featurize import FeatureContext
from ..labelgen import (
    LabelConfig,
    LabeledInstance,
    discretize,
    ordered_index_pairs,
    subsample_pairs,
)
from ..synthlog import Corpus, UserSegment

NEUTRAL_SEGMENT_ID = "all"


def neutral_segment(corpus: Corpus) -> UserSegment:
    """Segment that matches nothing: relevance judgments are query-level."""
    n_cat, _, n_latent = corpus.dims
    return UserSegment(
        segment_id=NEUTRAL_SEGMENT_ID,
        gender="unknown",
        country="",
        category_affinity=np.full(n_cat, 1.0 / n_cat),
        latent_vec=np.zeros(n_latent),
    )


@dataclass
class RankingDataset:
    """Rows, labels, and pair indices over one set of labeled groups."""

    X: np.ndarray
    labels: np.ndarray
    group_keys: list  # (query_id, segment_id) per group, row-major order
    group_slices: list  # (start, stop) row ranges aligned with group_keys
    pin_ids: list
    pairs: np.ndarray  # (m, 2) global row indices, winner first
    subset: str
    schema_id: str
    source: str = "engagement"
    ordinals: np.ndarray | None = None

    def __post_init__(self):
        if len(self.X) != len(self.labels) or len(self.X) != len(self.pin_ids):
            raise DataError("rows, labels, and pin ids must align")

    @property
    def n_rows(self) -> int:
        return len(self.X)

    def rows_for(self, key) -> range:
        i = self.group_keys.index(key)
        start, stop = self.group_slices[i]
        return range(start, stop)


def build_dataset(
    groups: dict,
    corpus: Corpus,
    ctx: FeatureContext,
    config: LabelConfig,
    seed: int,
    subset: str = "full",
    source: str = "engagement",
    with_ordinals: bool = False,
) -> RankingDataset:
    """Featurize labeled groups into one matrix plus preference pairs.

    Groups are processed in sorted key order so the row layout is a pure
    function of the input, independent of dict insertion order.
    """
    if not groups:
        raise DataError("no labeled groups to featurize")
    neutral = neutral_segment(corpus)
    blocks, labels, pin_ids = [], [], []
    group_keys, group_slices = [], []
    all_pairs = []
    offset = 0
    for key in sorted(groups):
        qid, sid = key
        insts: list[LabeledInstance] = groups[key]
        if not corpus.has_query(qid):
            raise DataError(f"labeled group references unknown query {qid!r}")
        query = corpus.query(qid)
        segment = neutral if sid == NEUTRAL_SEGMENT_ID else corpus.segment(sid)
        idx = np.array([corpus.pin_idx(inst.pin_id) for inst in insts], dtype=np.int64)
        blocks.append(ctx.matrix(query, segment, idx, subset=subset))
        group_labels = [inst.label for inst in insts]
        labels.extend(group_labels)
        pin_ids.extend(inst.pin_id for inst in insts)
        local = ordered_index_pairs(group_labels)
        local = subsample_pairs(local, config.max_pairs_per_group, seed, qid, sid)
        for i, j in local:
            all_pairs.append((offset + i, offset + j))
        group_keys.append(key)
        group_slices.append((offset, offset + len(insts)))
        offset += len(insts)

    X = np.vstack(blocks)
    labels = np.asarray(labels, dtype=np.float64)
    pairs = (
        np.asarray(all_pairs, dtype=np.int64) if all_pairs else np.empty((0, 2), dtype=np.int64)
    )
    ordinals = None
    if with_ordinals:
        if config.discretize_cuts is None:
            raise DataError("ordinal labels requested but no discretization cuts configured")
        ordinals = np.asarray(
            [discretize(float(v), config.discretize_cuts) for v in labels], dtype=np.int64
        )
    return RankingDataset(
        X=X,
        labels=labels,
        group_keys=group_keys,
        group_slices=group_slices,
        pin_ids=pin_ids,
        pairs=pairs,
        subset=subset,
        schema_id=ctx.schema.schema_id,
        source=source,
        ordinals=ordinals,
    )


def concat_datasets(a: RankingDataset, b: RankingDataset) -> tuple:
    """Stack two datasets; returns (X, pairs_a, pairs_b, rows_a, rows_b).

    Pair indices of the second block are shifted past the first. Used to
    train one model on engagement and relevance sources side by side.
    """
    if a.subset != b.subset or a.schema_id != b.schema_id:
        raise DataError("datasets must share schema and subset to be stacked")
    X = np.vstack([a.X, b.X])
    shift = a.n_rows
    pairs_b = b.pairs + shift if len(b.pairs) else np.empty((0, 2), dtype=np.int64)
    rows_a = np.arange(a.n_rows, dtype=np.int64)
    rows_b = np.arange(shift, shift + b.n_rows, dtype=np.int64)
    return X, a.pairs, pairs_b, rows_a, rows_b
