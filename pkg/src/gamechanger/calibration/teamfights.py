"""Teamfight detection from kill events and per-minute round labels."""

from __future__ import annotations

from dataclasses import dataclass

from .records import MatchRecord, minute_of

# kills closer than this (strictly) belong to the same fight
CLUSTER_GAP = 30.0

FARM = "F"
FIGHT = "T"


def cluster_kills(kills, gap: float = CLUSTER_GAP) -> list:
    """Greedy sequential clustering of time-sorted kills.

    A kill joins the current cluster iff it comes less than ``gap`` seconds
    after the previous kill.  Returns lists of the original events.
    """
    clusters = []
    prev = None
    for k in kills:
        if prev is not None and k.time < prev.time:
            raise ValueError("kills must be time-sorted")
        if prev is None or not k.time - prev.time < gap:
            clusters.append([])
        clusters[-1].append(k)
        prev = k
    return clusters


@dataclass(frozen=True)
class Teamfight:
    kill_indices: tuple
    end_time: float
    deaths_A: int
    deaths_B: int

    @property
    def winner(self) -> str:
        return "A" if self.deaths_A < self.deaths_B else "B"


def extract_teamfights(clusters) -> list:
    """Keep clusters with at least two deaths and a side with fewer deaths."""
    fights = []
    start = 0
    for c in clusters:
        idx = tuple(range(start, start + len(c)))
        start += len(c)
        deaths_A = sum(1 for k in c if k.victim_team == "A")
        deaths_B = len(c) - deaths_A
        if len(c) < 2 or deaths_A == deaths_B:
            continue
        fights.append(Teamfight(idx, c[-1].time, deaths_A, deaths_B))
    return fights


def match_teamfights(match: MatchRecord) -> list:
    """Provider annotations when present, otherwise clustered kills."""
    if match.teamfights is not None:
        return list(match.teamfights)
    return extract_teamfights(cluster_kills(match.kills))


@dataclass(frozen=True)
class RoundLabel:
    minute: int
    kind: str
    winner: str | None = None
    final: bool = False


def label_rounds(match: MatchRecord, teamfights, final_fight: bool = True) -> list:
    """One label per minute of the match.

    Minute ``t`` is a teamfight round iff some fight ends inside it; the last
    such fight decides the winner.  With ``final_fight`` the last minute is
    the game-ending teamfight won by the match winner, whatever the kill log
    shows, since every game in the model ends on a teamfight.
    """
    last = {}
    for f in sorted(teamfights, key=lambda f: f.end_time):
        last[minute_of(f.end_time)] = f.winner
    labels = []
    for t in range(1, match.duration + 1):
        final = t == match.duration
        if final and final_fight:
            labels.append(RoundLabel(t, FIGHT, match.winner, True))
        elif t in last:
            labels.append(RoundLabel(t, FIGHT, last[t], final))
        else:
            labels.append(RoundLabel(t, FARM, None, final))
    return labels

