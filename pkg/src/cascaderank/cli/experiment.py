"""Experiment configuration: one JSON document driving the whole pipeline.

Validation is diagnostic, not exception-driven: `diagnostics()` returns every
violation it can find in one pass, so a config can be fixed in one edit
rather than one error at a time. The pipeline itself still raises on the
first hard failure.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from ..cascade import CascadeConfig, RerankPolicy, default_cascade_config
from ..errors import ConfigError
from ..featurize import default_schema
from ..labelgen import LabelConfig
from ..rankmodels.base import MODEL_KINDS

TRAINED_KINDS = ("gbdt", "gbrt", "ranksvm", "ranknet", "dnn", "cnn")

DEFAULT_CORPUS = {"pins": 1200, "queries": 40, "segments": 8, "judgments_per_query": 40}
DEFAULT_SIMLOG = {"sessions": 9000, "position_bias": 1.0}
DEFAULT_EVAL = {"cutoffs": [5, 10, 20], "k": 25}
DEFAULT_BENCH = {
    "candidates": 100000,
    "bench_queries": 120,
    "reps": 5,
    "relevant_recall": 0.9,
    "min_keep": 100,
    # candidate pools are mostly non-matching noise, as a loose candidate
    # generator would emit; this is the fraction drawn from text matches
    "match_share": 0.02,
    # the bucket simulation runs where the priced full stage straddles the
    # 50/200ms boundaries; the wall benchmark alone uses `candidates`
    "sim_candidates": 2000,
}
DEFAULT_STACK = {"gamma": None, "trees": 30, "mode": "pairwise"}

DEFAULT_MODEL_HYPER = {
    "gbdt": {"trees": 40, "learning_rate": 0.1, "max_depth": 3, "min_leaf": 2},
    "gbrt": {"trees": 40, "learning_rate": 0.2, "max_depth": 3, "min_leaf": 2, "margin": 1.0},
    "ranksvm": {"cost": 1.0, "epochs": 60, "step": 0.1},
    "ranknet": {"hidden": 32, "epochs": 25, "step": 0.05, "batch_size": 64},
    "dnn": {"hidden": [64, 64], "epochs": 25, "step": 0.05, "batch_size": 64},
    "cnn": {
        "conv_channels": [8, 16],
        "conv_width": 3,
        "pool": 2,
        "fc_hidden": 32,
        "epochs": 25,
        "step": 0.05,
        "batch_size": 64,
    },
}

_SECTIONS = ("seed", "corpus", "simlog", "labels", "models", "stack", "cascade", "eval", "bench")


def _merged(defaults: dict, overrides) -> dict:
    out = copy.deepcopy(defaults)
    out.update(overrides or {})
    return out


@dataclass
class ExperimentConfig:
    seed: int
    corpus: dict = field(default_factory=lambda: dict(DEFAULT_CORPUS))
    simlog: dict = field(default_factory=lambda: dict(DEFAULT_SIMLOG))
    labels: LabelConfig = field(default_factory=LabelConfig)
    models: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_MODEL_HYPER))
    stack: dict = field(default_factory=lambda: dict(DEFAULT_STACK))
    cascade: CascadeConfig = field(default_factory=default_cascade_config)
    eval: dict = field(default_factory=lambda: dict(DEFAULT_EVAL))
    bench: dict = field(default_factory=lambda: dict(DEFAULT_BENCH))
    unused_keys: list = field(default_factory=list)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if "seed" not in d:
            raise ConfigError("experiment config must set a seed")
        models = {}
        for kind, hyper in _merged(DEFAULT_MODEL_HYPER, d.get("models")).items():
            base = copy.deepcopy(DEFAULT_MODEL_HYPER.get(kind, {}))
            base.update(hyper or {})
            models[kind] = base
        cascade_section = d.get("cascade")
        cascade = (
            CascadeConfig.from_dict(cascade_section, validate=False)
            if cascade_section
            else default_cascade_config()
        )
        unused = [k for k in d if k not in _SECTIONS]
        return cls(
            seed=int(d["seed"]),
            corpus=_merged(DEFAULT_CORPUS, d.get("corpus")),
            simlog=_merged(DEFAULT_SIMLOG, d.get("simlog")),
            labels=LabelConfig.from_dict(d.get("labels") or {}),
            models=models,
            stack=_merged(DEFAULT_STACK, d.get("stack")),
            cascade=cascade,
            eval=_merged(DEFAULT_EVAL, d.get("eval")),
            bench=_merged(DEFAULT_BENCH, d.get("bench")),
            unused_keys=sorted(unused),
        )

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "corpus": self.corpus,
            "simlog": self.simlog,
            "labels": self.labels.to_dict(),
            "models": self.models,
            "stack": self.stack,
            "cascade": self.cascade.to_dict(),
            "eval": self.eval,
            "bench": self.bench,
        }

    def diagnostics(self) -> list:
        """Every violation found, as human-readable strings; empty means ok."""
        issues = []
        if self.unused_keys:
            issues.append(f"unused top-level keys: {', '.join(self.unused_keys)}")
        for name in ("pins", "queries", "segments"):
            if int(self.corpus.get(name, 0)) < 1:
                issues.append(f"corpus.{name} must be >= 1")
        if int(self.simlog.get("sessions", 0)) < 1:
            issues.append("simlog.sessions must be >= 1")
        if float(self.simlog.get("position_bias", 0.0)) < 0.0:
            issues.append("simlog.position_bias must be >= 0")

        missing = [k for k in TRAINED_KINDS if k not in self.models]
        if missing:
            issues.append(f"models section missing kinds: {', '.join(missing)}")
        for kind in self.models:
            if kind not in MODEL_KINDS:
                issues.append(
                    f"unknown model kind '{kind}', valid kinds: {', '.join(MODEL_KINDS)}"
                )

        try:
            self.labels.validate()
        except ConfigError as e:
            issues.append(f"labels: {e}")

        schema = default_schema()
        known_subsets = {"full", *schema.subsets}
        for stage in self.cascade.stages:
            if stage.subset not in known_subsets:
                issues.append(
                    f"stage '{stage.name}' references unknown subset '{stage.subset}', "
                    f"known: {', '.join(sorted(known_subsets))}"
                )
        try:
            self.cascade.validate()
        except ConfigError as e:
            issues.append(f"cascade: {e}")

        gamma = self.stack.get("gamma")
        if gamma is not None and not 0.0 <= float(gamma) <= 1.0:
            issues.append("stack.gamma must be in [0, 1] or null for grid selection")
        if self.stack.get("mode") not in ("pairwise", "mixed_pointwise"):
            issues.append("stack.mode must be 'pairwise' or 'mixed_pointwise'")

        for name in ("cutoffs", "k"):
            if name not in self.eval:
                issues.append(f"eval.{name} missing")
        if any(int(p) < 1 for p in self.eval.get("cutoffs", [])):
            issues.append("eval.cutoffs must be positive")
        if int(self.bench.get("candidates", 0)) < 1000:
            issues.append("bench.candidates must be >= 1000")
        if not 0.0 < float(self.bench.get("relevant_recall", 0.9)) <= 1.0:
            issues.append("bench.relevant_recall must be in (0, 1]")
        return issues

    def validate(self) -> None:
        issues = self.diagnostics()
        if issues:
            raise ConfigError("; ".join(issues))
