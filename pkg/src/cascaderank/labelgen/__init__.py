"""Label generation: weighted action aggregation, position/age de-biasing,
pruning, relevance judgment averaging, discretization, pairs, and splits."""

from .config import LabelConfig
from .labels import (
    ENGAGEMENT,
    RELEVANCE,
    LabeledInstance,
    aggregate_label,
    apply_ordinals,
    average_judgments,
    build_instances,
    derive_cuts,
    discretize,
    group_instances,
    normalize_label,
    prune_groups,
)
from .pairs import PreferencePair, extract_pairs, ordered_index_pairs, subsample_pairs
from .split import DEFAULT_FRACTIONS, SPLIT_NAMES, split_dataset, split_groups
from .weights import default_weights

__all__ = [
    "DEFAULT_FRACTIONS",
    "ENGAGEMENT",
    "LabelConfig",
    "LabeledInstance",
    "PreferencePair",
    "RELEVANCE",
    "SPLIT_NAMES",
    "aggregate_label",
    "apply_ordinals",
    "average_judgments",
    "build_instances",
    "default_weights",
    "derive_cuts",
    "discretize",
    "extract_pairs",
    "group_instances",
    "normalize_label",
    "ordered_index_pairs",
    "prune_groups",
    "split_dataset",
    "split_groups",
    "subsample_pairs",
]
