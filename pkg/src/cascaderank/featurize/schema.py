"""Feature schema: canonical feature order and the per-stage subsets."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigError, DataError

# Canonical feature order. The 1-D convolution model consumes vectors in this
# order, so it is part of every serialized model's contract (schema_id).
FEATURE_NAMES = (
    "bm25",
    "proximity_bm25",
    "categoryboost",
    "topicboost",
    "embedding_sim",
    "navboost_closeup",
    "navboost_repin",
    "navboost_longclick",
    "navboost_click",
    "navboost_seen",
    "tokenboost",
    "tokenboost_seen",
    "gender_match",
    "personal_category",
    "personal_embedding",
    "query_length",
    "query_frequency",
    "query_male_score",
    "social_score",
    "freshness",
    "locale_match",
    "diversity_penalty",
)

# Cheap subset scored over the whole candidate pool by the first funnel stage.
LIGHTWEIGHT_SUBSET = (
    "bm25",
    "navboost_repin",
    "navboost_click",
    "tokenboost",
    "categoryboost",
    "freshness",
    "social_score",
    "locale_match",
)

# Compact subset for the re-ranking stage; diversity_penalty is zero at
# featurize time and filled greedily while the re-ranker builds the list.
RERANK_SUBSET = (
    "freshness",
    "locale_match",
    "navboost_repin",
    "navboost_click",
    "embedding_sim",
    "diversity_penalty",
)

SCHEMA_ID = "core-v1"


@dataclass
class FeatureSchema:
    schema_id: str
    names: tuple
    subsets: dict = field(default_factory=dict)

    def __post_init__(self):
        self.names = tuple(self.names)
        if len(set(self.names)) != len(self.names):
            raise ConfigError("feature names must be unique")
        self._index = {name: i for i, name in enumerate(self.names)}
        for subset, members in self.subsets.items():
            unknown = [m for m in members if m not in self._index]
            if unknown:
                raise ConfigError(f"subset '{subset}' references unknown features: {unknown}")

    def index(self, name: str) -> int:
        if name not in self._index:
            raise ConfigError(f"unknown feature '{name}'")
        return self._index[name]

    def subset_names(self, subset: str) -> tuple:
        if subset == "full":
            return self.names
        if subset not in self.subsets:
            raise ConfigError(f"unknown feature subset '{subset}'")
        return tuple(self.subsets[subset])

    def subset_indices(self, subset: str) -> list[int]:
        return [self._index[n] for n in self.subset_names(subset)]

    def width(self, subset: str = "full") -> int:
        return len(self.subset_names(subset))

    def to_dict(self) -> dict:
        return {
            "schema_id": self.schema_id,
            "names": list(self.names),
            "subsets": {k: list(v) for k, v in sorted(self.subsets.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(schema_id=d["schema_id"], names=tuple(d["names"]), subsets=dict(d.get("subsets", {})))


def default_schema() -> FeatureSchema:
    return FeatureSchema(
        schema_id=SCHEMA_ID,
        names=FEATURE_NAMES,
        subsets={"lightweight": list(LIGHTWEIGHT_SUBSET), "rerank": list(RERANK_SUBSET)},
    )


def check_width(schema_id: str, expected: int, actual: int) -> None:
    if actual != expected:
        raise DataError(
            f"feature vector width {actual} does not match schema '{schema_id}' width {expected}"
        )
