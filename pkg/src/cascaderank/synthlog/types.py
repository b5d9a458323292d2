"""Domain types: pins, queries, user segments, engagement records, actions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError

# Engagement action vocabulary. "hide" is the one negative-feedback action;
# everything else counts as positive engagement.
POSITIVE_ACTIONS = ("closeup", "repin", "longclick", "click")
NEGATIVE_ACTIONS = ("hide",)
ACTION_NAMES = POSITIVE_ACTIONS + NEGATIVE_ACTIONS

# Relative traffic volume per action used by the simulator and by the default
# label weights. Closeups dominate, clicks are the rarest positive action.
DEFAULT_ACTION_VOLUMES = {"closeup": 50, "repin": 20, "longclick": 15, "click": 10, "hide": 5}


@dataclass(frozen=True)
class ActionType:
    """One engagement action: its name, relative volume, and feedback sign."""

    name: str
    volume: int
    negative: bool = False


def default_action_types() -> list[ActionType]:
    return [
        ActionType(name, DEFAULT_ACTION_VOLUMES[name], negative=name in NEGATIVE_ACTIONS)
        for name in ACTION_NAMES
    ]


@dataclass
class Pin:
    """One item in the searchable corpus.

    `annotations` is an ordered token list (duplicates allowed, term frequency
    matters for text scoring). `category_dist` and `topic_dist` are probability
    vectors; `latent_vec` is an unnormalized embedding. `male_score` in [0,1]
    encodes gender leaning with 0.5 neutral.
    """

    pin_id: str
    annotations: list[str]
    category_dist: np.ndarray
    topic_dist: np.ndarray
    latent_vec: np.ndarray
    linked_country: str
    age_days: float
    social_score: float
    male_score: float

    def to_dict(self) -> dict:
        return {
            "pin_id": self.pin_id,
            "annotations": list(self.annotations),
            "category_dist": [float(v) for v in self.category_dist],
            "topic_dist": [float(v) for v in self.topic_dist],
            "latent_vec": [float(v) for v in self.latent_vec],
            "linked_country": self.linked_country,
            "age_days": float(self.age_days),
            "social_score": float(self.social_score),
            "male_score": float(self.male_score),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Pin":
        return cls(
            pin_id=d["pin_id"],
            annotations=list(d["annotations"]),
            category_dist=np.asarray(d["category_dist"], dtype=np.float64),
            topic_dist=np.asarray(d["topic_dist"], dtype=np.float64),
            latent_vec=np.asarray(d["latent_vec"], dtype=np.float64),
            linked_country=d["linked_country"],
            age_days=float(d["age_days"]),
            social_score=float(d["social_score"]),
            male_score=float(d["male_score"]),
        )


@dataclass
class Query:
    query_id: str
    tokens: list[str]
    category_dist: np.ndarray
    topic_dist: np.ndarray
    latent_vec: np.ndarray
    frequency: int
    male_oriented_score: float

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "tokens": list(self.tokens),
            "category_dist": [float(v) for v in self.category_dist],
            "topic_dist": [float(v) for v in self.topic_dist],
            "latent_vec": [float(v) for v in self.latent_vec],
            "frequency": int(self.frequency),
            "male_oriented_score": float(self.male_oriented_score),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Query":
        return cls(
            query_id=d["query_id"],
            tokens=list(d["tokens"]),
            category_dist=np.asarray(d["category_dist"], dtype=np.float64),
            topic_dist=np.asarray(d["topic_dist"], dtype=np.float64),
            latent_vec=np.asarray(d["latent_vec"], dtype=np.float64),
            frequency=int(d["frequency"]),
            male_oriented_score=float(d["male_oriented_score"]),
        )


GENDERS = ("female", "male", "unknown")


@dataclass
class UserSegment:
    """A coarse user cohort: gender bucket, country, interest profile."""

    segment_id: str
    gender: str
    country: str
    category_affinity: np.ndarray
    latent_vec: np.ndarray

    def to_dict(self) -> dict:
        return {
            "segment_id": self.segment_id,
            "gender": self.gender,
            "country": self.country,
            "category_affinity": [float(v) for v in self.category_affinity],
            "latent_vec": [float(v) for v in self.latent_vec],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UserSegment":
        return cls(
            segment_id=d["segment_id"],
            gender=d["gender"],
            country=d["country"],
            category_affinity=np.asarray(d["category_affinity"], dtype=np.float64),
            latent_vec=np.asarray(d["latent_vec"], dtype=np.float64),
        )


@dataclass(frozen=True)
class EngagementRecord:
    """One impression of a pin for a (query, segment) and the actions it drew.

    `action_counts` maps action name to a non-negative count; pins shown
    without any reaction carry an empty mapping. `position` is the 0-based
    rank at impression time.
    """

    query_id: str
    segment_id: str
    pin_id: str
    action_counts: dict
    position: int
    age_days_at_impression: float

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "segment_id": self.segment_id,
            "pin_id": self.pin_id,
            "action_counts": {k: int(v) for k, v in sorted(self.action_counts.items())},
            "position": int(self.position),
            "age_days_at_impression": float(self.age_days_at_impression),
        }

    def positive_count(self) -> int:
        return sum(int(c) for a, c in self.action_counts.items() if a in POSITIVE_ACTIONS)


def validate_record(d: dict, lineno: int, source: str, allowed_actions=ACTION_NAMES) -> EngagementRecord:
    """Turn a parsed JSON object into an EngagementRecord or raise DataError."""
    where = f"{source}: line {lineno}"
    for key in ("query_id", "segment_id", "pin_id", "action_counts", "position", "age_days_at_impression"):
        if key not in d:
            raise DataError(f"{where}: missing field '{key}'")
    counts = d["action_counts"]
    if not isinstance(counts, dict):
        raise DataError(f"{where}: action_counts must be an object")
    clean = {}
    for action, count in counts.items():
        if action not in allowed_actions:
            raise DataError(
                f"{where}: unknown action '{action}' (valid: {', '.join(allowed_actions)})"
            )
        if not isinstance(count, int) or isinstance(count, bool) or count < 0:
            raise DataError(f"{where}: action count for '{action}' must be a non-negative integer")
        clean[action] = count
    position = d["position"]
    if not isinstance(position, int) or isinstance(position, bool) or position < 0:
        raise DataError(f"{where}: position must be a non-negative integer")
    age = d["age_days_at_impression"]
    if not isinstance(age, (int, float)) or isinstance(age, bool) or age < 0:
        raise DataError(f"{where}: age_days_at_impression must be a non-negative number")
    return EngagementRecord(
        query_id=str(d["query_id"]),
        segment_id=str(d["segment_id"]),
        pin_id=str(d["pin_id"]),
        action_counts=clean,
        position=position,
        age_days_at_impression=float(age),
    )


@dataclass
class RelevanceJudgment:
    """Human ratings for a (query, pin): each rating is 0, 1, or 2."""

    query_id: str
    pin_id: str
    ratings: list[int]

    def to_dict(self) -> dict:
        return {"query_id": self.query_id, "pin_id": self.pin_id, "ratings": [int(r) for r in self.ratings]}

    @classmethod
    def from_dict(cls, d: dict) -> "RelevanceJudgment":
        return cls(query_id=d["query_id"], pin_id=d["pin_id"], ratings=[int(r) for r in d["ratings"]])


@dataclass
class Corpus:
    """A generated corpus plus the planted utility used only for simulation
    and evaluation. Feature extraction never reads `utility`."""

    pins: list[Pin]
    queries: list[Query]
    segments: list[UserSegment]
    dims: tuple[int, int, int]  # (categories, topics, latent width)
    seed: int
    utility: dict = field(default_factory=dict)  # query_id -> np.ndarray over pins
    judgments: list[RelevanceJudgment] = field(default_factory=list)

    def __post_init__(self):
        self._pin_index = {p.pin_id: i for i, p in enumerate(self.pins)}
        self._query_index = {q.query_id: i for i, q in enumerate(self.queries)}
        self._segment_index = {s.segment_id: i for i, s in enumerate(self.segments)}

    def pin(self, pin_id: str) -> Pin:
        return self.pins[self._pin_index[pin_id]]

    def pin_idx(self, pin_id: str) -> int:
        return self._pin_index[pin_id]

    def query(self, query_id: str) -> Query:
        return self.queries[self._query_index[query_id]]

    def segment(self, segment_id: str) -> UserSegment:
        return self.segments[self._segment_index[segment_id]]

    def has_query(self, query_id: str) -> bool:
        return query_id in self._query_index

    def columns(self) -> "PinColumns":
        if not hasattr(self, "_columns"):
            self._columns = PinColumns.from_pins(self.pins)
        return self._columns


class PinColumns:
    """Columnar views over the pin list for vectorized featurization."""

    def __init__(self, pin_ids, category, topic, latent, age_days, social, male, countries, ann_len):
        self.pin_ids = pin_ids
        self.category = category
        self.topic = topic
        self.latent = latent
        self.age_days = age_days
        self.social = social
        self.male = male
        self.countries = countries
        self.ann_len = ann_len
        # rank of each pin id in ascending lexicographic order, for tie-breaks
        order = sorted(range(len(pin_ids)), key=lambda i: pin_ids[i])
        self.pid_rank = np.empty(len(pin_ids), dtype=np.int64)
        for rank, i in enumerate(order):
            self.pid_rank[i] = rank

    @classmethod
    def from_pins(cls, pins: list[Pin]) -> "PinColumns":
        if not pins:
            raise DataError("corpus has no pins")
        return cls(
            pin_ids=[p.pin_id for p in pins],
            category=np.stack([p.category_dist for p in pins]).astype(np.float64),
            topic=np.stack([p.topic_dist for p in pins]).astype(np.float64),
            latent=np.stack([p.latent_vec for p in pins]).astype(np.float64),
            age_days=np.array([p.age_days for p in pins], dtype=np.float64),
            social=np.array([p.social_score for p in pins], dtype=np.float64),
            male=np.array([p.male_score for p in pins], dtype=np.float64),
            countries=[p.linked_country for p in pins],
            ann_len=np.array([len(p.annotations) for p in pins], dtype=np.float64),
        )
