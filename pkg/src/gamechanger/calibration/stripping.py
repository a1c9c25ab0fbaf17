"""Removing the original Game Changer rewards from wealth telemetry."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .records import MatchRecord, minute_of

GAMES = ("lol", "dota2")

# team-level reward of one Baron kill (300 per player)
LOL_BARON_REWARD = 1500.0
# expected team-level gold of one Roshan kill, excluding the dropped items
DOTA2_ROSHAN_GOLD = 920.0


@dataclass(frozen=True)
class RewardConfig:
    game: str = "lol"
    roshan_item_value: float = 0.0
    reward_override: float | None = None

    def __post_init__(self):
        if self.game not in GAMES:
            raise ValueError(f"game must be one of {GAMES}, got {self.game!r}")

    @property
    def reward(self) -> float:
        if self.reward_override is not None:
            return float(self.reward_override)
        if self.game == "lol":
            return LOL_BARON_REWARD
        return DOTA2_ROSHAN_GOLD + float(self.roshan_item_value)


def _shift(match: MatchRecord, config: RewardConfig, sign: float) -> MatchRecord:
    if match.gc_kills is None:
        raise ValueError(f"match {match.match_id}: no gc_kills recorded, cannot strip rewards")
    wa = np.array(match.wealth_A, dtype=float)
    wb = np.array(match.wealth_B, dtype=float)
    for t, team in match.gc_kills:
        # the reward shows up in the wealth after the kill minute
        start = minute_of(t)
        (wa if team == "A" else wb)[start:] += sign * config.reward
    return match.with_wealth(wa, wb)


def strip_gc_rewards(match: MatchRecord, config: RewardConfig | None = None,
                     enabled: bool = True) -> MatchRecord:
    """Subtract the configured reward from the killer's wealth from the kill
    minute on.  ``enabled=False`` returns the match unchanged."""
    if not enabled:
        return match
    return _shift(match, config or RewardConfig(), -1.0)


def restore_gc_rewards(match: MatchRecord, config: RewardConfig | None = None) -> MatchRecord:
    """Inverse of :func:`strip_gc_rewards`."""
    return _shift(match, config or RewardConfig(), 1.0)
