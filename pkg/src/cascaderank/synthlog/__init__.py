"""Synthetic corpus, engagement-log simulation, and log I/O."""

from .generate import generate_corpus, planted_utility, simulate_judgments
from .logio import read_corpus, read_judgments, read_log, write_corpus, write_log
from .simulate import simulate_log
from .types import (
    ACTION_NAMES,
    DEFAULT_ACTION_VOLUMES,
    NEGATIVE_ACTIONS,
    POSITIVE_ACTIONS,
    ActionType,
    Corpus,
    EngagementRecord,
    Pin,
    Query,
    RelevanceJudgment,
    UserSegment,
    default_action_types,
)

__all__ = [
    "ACTION_NAMES",
    "DEFAULT_ACTION_VOLUMES",
    "NEGATIVE_ACTIONS",
    "POSITIVE_ACTIONS",
    "ActionType",
    "Corpus",
    "EngagementRecord",
    "Pin",
    "Query",
    "RelevanceJudgment",
    "UserSegment",
    "default_action_types",
    "generate_corpus",
    "planted_utility",
    "read_corpus",
    "read_judgments",
    "read_log",
    "simulate_judgments",
    "simulate_log",
    "write_corpus",
    "write_log",
]
