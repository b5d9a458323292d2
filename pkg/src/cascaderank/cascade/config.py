"""Cascade layout: an ordered funnel of scoring stages plus a re-rank policy.

Each stage sees only its own feature subset and keeps a shrinking top slice,
so the expensive models run on fractions of the candidate pool. Stage order
and cut sizes are data, not code; the runner executes whatever layout the
config declares.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigError

STAGE_KINDS = ("score", "rerank")

DEFAULT_FUNNEL = (1000, 100, 25)


@dataclass
class AdaptiveCut:
    """Optional early cut: drop candidates scoring below the floor, but never
    keep fewer than min_keep or more than the stage's keep_top."""

    floor: float
    min_keep: int = 1

    def validate(self) -> None:
        if self.min_keep < 1:
            raise ConfigError("adaptive min_keep must be >= 1")

    def to_dict(self) -> dict:
        return {"floor": self.floor, "min_keep": self.min_keep}

    @classmethod
    def from_dict(cls, d: dict) -> "AdaptiveCut":
        return cls(floor=float(d["floor"]), min_keep=int(d.get("min_keep", 1)))


@dataclass
class StageSpec:
    name: str
    subset: str
    keep_top: int
    kind: str = "score"
    model_ref: str | None = None  # model file path, resolved by the CLI
    adaptive: AdaptiveCut | None = None

    def validate(self) -> None:
        if not self.name:
            raise ConfigError("stage name must be non-empty")
        if self.kind not in STAGE_KINDS:
            raise ConfigError(f"stage kind must be one of {STAGE_KINDS}, got {self.kind!r}")
        if self.keep_top < 1:
            raise ConfigError(f"stage {self.name!r}: keep_top must be >= 1")
        if self.adaptive is not None:
            self.adaptive.validate()
            if self.adaptive.min_keep > self.keep_top:
                raise ConfigError(f"stage {self.name!r}: adaptive min_keep exceeds keep_top")

    def to_dict(self) -> dict:
        d = {"name": self.name, "subset": self.subset, "keep_top": self.keep_top, "kind": self.kind}
        if self.model_ref is not None:
            d["model_ref"] = self.model_ref
        if self.adaptive is not None:
            d["adaptive"] = self.adaptive.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StageSpec":
        adaptive = AdaptiveCut.from_dict(d["adaptive"]) if d.get("adaptive") else None
        return cls(
            name=d["name"],
            subset=d["subset"],
            keep_top=int(d["keep_top"]),
            kind=d.get("kind", "score"),
            model_ref=d.get("model_ref"),
            adaptive=adaptive,
        )


@dataclass
class RerankPolicy:
    """Business adjustments applied while the final list is assembled.

    Weights act on top of the model score, scaled by the score span of the
    incoming candidates, so a weight of 0.1 means roughly a tenth of the
    score range. An all-zero policy leaves order and scores untouched.
    min_fresh_ratio is a prefix quota: after m picks at least
    floor(ratio * m) of them must be fresh (age at most fresh_age_days),
    provided fresh candidates remain.
    """

    freshness_weight: float = 0.0
    localness_weight: float = 0.0
    diversity_weight: float = 0.0
    min_fresh_ratio: float = 0.0
    fresh_age_days: float = 30.0

    def validate(self) -> None:
        if not 0.0 <= self.min_fresh_ratio <= 1.0:
            raise ConfigError("min_fresh_ratio must be in [0, 1]")
        if self.fresh_age_days <= 0:
            raise ConfigError("fresh_age_days must be > 0")
        if self.freshness_weight < 0 or self.localness_weight < 0 or self.diversity_weight < 0:
            raise ConfigError("policy weights must be >= 0")

    def is_noop(self) -> bool:
        return (
            self.freshness_weight == 0.0
            and self.localness_weight == 0.0
            and self.diversity_weight == 0.0
            and self.min_fresh_ratio == 0.0
        )

    def to_dict(self) -> dict:
        return {
            "freshness_weight": self.freshness_weight,
            "localness_weight": self.localness_weight,
            "diversity_weight": self.diversity_weight,
            "min_fresh_ratio": self.min_fresh_ratio,
            "fresh_age_days": self.fresh_age_days,
        }

    @classmethod
    def from_dict(cls, d: dict, validate: bool = True) -> "RerankPolicy":
        policy = cls(
            freshness_weight=float(d.get("freshness_weight", 0.0)),
            localness_weight=float(d.get("localness_weight", 0.0)),
            diversity_weight=float(d.get("diversity_weight", 0.0)),
            min_fresh_ratio=float(d.get("min_fresh_ratio", 0.0)),
            fresh_age_days=float(d.get("fresh_age_days", 30.0)),
        )
        if validate:
            policy.validate()
        return policy


@dataclass
class CascadeConfig:
    stages: list = field(default_factory=list)
    policy: RerankPolicy = field(default_factory=RerankPolicy)

    def validate(self) -> None:
        if not self.stages:
            raise ConfigError("cascade needs at least one stage")
        names = [s.name for s in self.stages]
        if len(set(names)) != len(names):
            raise ConfigError("stage names must be unique")
        for i, stage in enumerate(self.stages):
            stage.validate()
            if stage.kind == "rerank" and i != len(self.stages) - 1:
                raise ConfigError("a rerank stage must come last")
        cuts = [s.keep_top for s in self.stages]
        for a, b in zip(cuts, cuts[1:]):
            if b >= a:
                raise ConfigError(f"keep_top must strictly decrease along the funnel, got {cuts}")
        self.policy.validate()

    def to_dict(self) -> dict:
        return {"stages": [s.to_dict() for s in self.stages], "policy": self.policy.to_dict()}

    @classmethod
    def from_dict(cls, d: dict, validate: bool = True) -> "CascadeConfig":
        cfg = cls(
            stages=[StageSpec.from_dict(s) for s in d.get("stages", [])],
            policy=RerankPolicy.from_dict(d.get("policy", {}), validate=validate),
        )
        if validate:
            cfg.validate()
        return cfg


def default_cascade_config(policy: RerankPolicy | None = None) -> CascadeConfig:
    """Three-stage funnel: cheap cut to 1000, full model to 100, re-rank to 25."""
    k1, k2, k3 = DEFAULT_FUNNEL
    cfg = CascadeConfig(
        stages=[
            StageSpec(name="lightweight", subset="lightweight", keep_top=k1),
            StageSpec(name="full", subset="full", keep_top=k2),
            StageSpec(name="rerank", subset="rerank", keep_top=k3, kind="rerank"),
        ],
        policy=policy or RerankPolicy(),
    )
    cfg.validate()
    return cfg
