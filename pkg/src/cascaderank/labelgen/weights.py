"""Action weight derivation from traffic volumes."""

from __future__ import annotations

from ..errors import ConfigError
from ..synthlog.types import NEGATIVE_ACTIONS


def default_weights(action_volumes: dict, negative_actions=NEGATIVE_ACTIONS) -> dict:
    """Volume-inverse weights: w = min positive volume / own volume.

    The rarest positive action lands exactly at 1.0, more frequent ones below,
    so rare explicit signals are not drowned out. Negative-feedback actions get
    the same magnitude with the sign flipped.
    """
    if not action_volumes:
        raise ConfigError("action volume table is empty")
    for name, vol in action_volumes.items():
        if int(vol) < 1:
            raise ConfigError(f"action '{name}' volume must be >= 1")
    positive = {n: int(v) for n, v in action_volumes.items() if n not in negative_actions}
    if not positive:
        raise ConfigError("need at least one positive action volume")
    min_vol = min(positive.values())
    weights = {}
    for name, vol in action_volumes.items():
        w = min_vol / int(vol)
        weights[name] = -w if name in negative_actions else w
    return weights
