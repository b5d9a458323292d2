"""Label pipeline configuration."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigError
from ..synthlog.types import DEFAULT_ACTION_VOLUMES, NEGATIVE_ACTIONS
from .weights import default_weights


@dataclass
class LabelConfig:
    """Knobs for turning raw engagement into training labels.

    action_weights: per-action label weight, negative for hide.
    tau: age scale (days) of the de-bias multiplier; the age term is
        1 / (ln(age / tau) + 1) with age clamped below at tau.
    lambda_pos: exponent scale of the position term exp(lambda_pos * position).
    neg_cap: max negatives kept per (query, segment) group after pruning.
    discretize_cuts: three ascending cuts mapping labels to ordinal 1..4;
        None means derive from the quartiles of positive training labels.
    max_pairs_per_group: cap on preference pairs extracted per group.
    """

    action_weights: dict = field(default_factory=lambda: default_weights(DEFAULT_ACTION_VOLUMES))
    tau: float = 30.0
    lambda_pos: float = 0.05
    neg_cap: int = 20
    discretize_cuts: tuple | None = None
    max_pairs_per_group: int = 100

    def validate(self) -> None:
        if not self.action_weights:
            raise ConfigError("action_weights must not be empty")
        if not any(w > 0 for w in self.action_weights.values()):
            raise ConfigError("action_weights needs at least one positive weight")
        for name in NEGATIVE_ACTIONS:
            if self.action_weights.get(name, -1.0) >= 0:
                raise ConfigError(f"weight for negative action '{name}' must be negative")
        if self.tau <= 0:
            raise ConfigError("tau must be > 0")
        if self.neg_cap < 1:
            raise ConfigError("neg_cap must be >= 1")
        if self.max_pairs_per_group < 1:
            raise ConfigError("max_pairs_per_group must be >= 1")
        if self.discretize_cuts is not None:
            cuts = tuple(self.discretize_cuts)
            if len(cuts) != 3 or not (cuts[0] < cuts[1] < cuts[2]):
                raise ConfigError("discretize_cuts must be three strictly ascending values")

    @classmethod
    def from_dict(cls, d: dict) -> "LabelConfig":
        """Build from a config mapping. Accepts either explicit action_weights
        or action_volumes (converted via default_weights)."""
        d = dict(d)
        if "action_weights" in d:
            weights = {k: float(v) for k, v in d["action_weights"].items()}
        elif "action_volumes" in d:
            weights = default_weights({k: int(v) for k, v in d["action_volumes"].items()})
        else:
            weights = default_weights(DEFAULT_ACTION_VOLUMES)
        cuts = d.get("discretize_cuts")
        cfg = cls(
            action_weights=weights,
            tau=float(d.get("tau", 30.0)),
            lambda_pos=float(d.get("lambda_pos", 0.05)),
            neg_cap=int(d.get("neg_cap", 20)),
            discretize_cuts=tuple(cuts) if cuts is not None else None,
            max_pairs_per_group=int(d.get("max_pairs_per_group", 100)),
        )
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {
            "action_weights": {k: float(v) for k, v in sorted(self.action_weights.items())},
            "tau": self.tau,
            "lambda_pos": self.lambda_pos,
            "neg_cap": self.neg_cap,
            "discretize_cuts": list(self.discretize_cuts) if self.discretize_cuts else None,
            "max_pairs_per_group": self.max_pairs_per_group,
        }
