"""Versioned JSON persistence for ranking models.

Every model serializes to an envelope carrying a format tag, the header
fields shared by all kinds, and a kind-specific params block. Floats are
written with repr precision, so save/load round-trips are bitwise exact.
"""

from __future__ import annotations

from ..errors import DataError
from ..util import canonical_dumps, read_json, write_json
from .base import RankModel
from .boosting import BoostEnsemble
from .conv import CNNModel
from .linear import LinearRankModel, RuleModel
from .neural import DNNModel, RankNetModel

MODEL_FORMAT = "cascaderank-model/1"
STACK_FORMAT = "cascaderank-stack/1"

_KIND_REGISTRY = {
    "gbdt": BoostEnsemble,
    "gbrt": BoostEnsemble,
    "ranksvm": LinearRankModel,
    "ranknet": RankNetModel,
    "dnn": DNNModel,
    "cnn": CNNModel,
    "rule": RuleModel,
}

_HEADER_FIELDS = ("kind", "schema_id", "subset", "n_features", "seed", "hyper", "training")


def model_to_dict(model) -> dict:
    if getattr(model, "kind", None) == "stacked":
        return model.to_dict()
    return {
        "format": MODEL_FORMAT,
        "kind": model.kind,
        "schema_id": model.schema_id,
        "subset": model.subset,
        "n_features": model.n_features,
        "seed": model.seed,
        "hyper": model.hyper,
        "training": model.training,
        "params": model.params_to_dict(),
    }


def model_from_dict(d: dict) -> RankModel:
    fmt = d.get("format")
    if fmt == STACK_FORMAT:
        from ..ensemble import StackedModel  # local import, ensemble builds on this module

        return StackedModel.from_dict(d)
    if fmt != MODEL_FORMAT:
        raise DataError(f"unsupported model format {fmt!r}, expected {MODEL_FORMAT!r}")
    missing = [f for f in _HEADER_FIELDS if f not in d]
    if missing:
        raise DataError(f"model file is missing fields: {', '.join(missing)}")
    kind = d["kind"]
    cls = _KIND_REGISTRY.get(kind)
    if cls is None:
        raise DataError(f"unknown model kind {kind!r}, expected one of {sorted(_KIND_REGISTRY)}")
    header = {f: d[f] for f in _HEADER_FIELDS}
    return cls.params_from_dict(d["params"], header)


def save_model(model: RankModel, path) -> None:
    write_json(path, model_to_dict(model))


def load_model(path) -> RankModel:
    return model_from_dict(read_json(path))


def model_digest(model: RankModel) -> str:
    """Canonical JSON of the full model, for byte-identity checks."""
    return canonical_dumps(model_to_dict(model))
