"""Shared fixtures: one tiny end-to-end workspace reused across modules.

Everything is derived deterministically from a fixed seed at session scope,
so the generation cost is paid once and tests can assert exact values.
"""

from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from cascaderank.cli.experiment import ExperimentConfig
from cascaderank.cli.pipeline import build_context, build_labels, make_datasets
from cascaderank.synthlog import generate_corpus, simulate_log

settings.register_profile(
    "suite",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

TINY = {
    "seed": 7,
    "corpus": {"pins": 150, "queries": 8, "segments": 3, "judgments_per_query": 12},
    "simlog": {"sessions": 800, "position_bias": 1.0},
}


@pytest.fixture(scope="session")
def tiny_config() -> ExperimentConfig:
    return ExperimentConfig.from_dict(TINY)


@pytest.fixture(scope="session")
def corpus(tiny_config):
    c = tiny_config.corpus
    return generate_corpus(
        tiny_config.seed,
        n_pins=c["pins"],
        n_queries=c["queries"],
        n_segments=c["segments"],
        judgments_per_query=c["judgments_per_query"],
    )


@pytest.fixture(scope="session")
def records(tiny_config, corpus):
    return simulate_log(
        corpus,
        tiny_config.simlog["sessions"],
        tiny_config.simlog["position_bias"],
        tiny_config.seed,
    )


@pytest.fixture(scope="session")
def label_arts(tiny_config, corpus, records):
    return build_labels(records, corpus.judgments, tiny_config.labels, tiny_config.seed)


@pytest.fixture(scope="session")
def ctx(corpus, records, label_arts):
    return build_context(corpus, records, label_arts.assignment)


@pytest.fixture(scope="session")
def datasets(label_arts, corpus, ctx, tiny_config):
    return make_datasets(label_arts, corpus, ctx, tiny_config.seed)
