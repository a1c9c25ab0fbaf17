"""Match telemetry records and their JSON file format.

One JSON object per match::

    {"match_id": "...", "duration_minutes": 31, "winner": "A",
     "wealth_A": [...], "wealth_B": [...],
     "kills": [{"t_seconds": 412.0, "killer": "A"}, ...],
     "gc_kills": [{"t_seconds": 1290.0, "team": "B"}],          # optional
     "teamfights": [{"end_seconds": 1301.5, "winner": "B"}]}    # optional

``wealth_X[i]`` is the team's total wealth after ``i`` completed minutes, so
index 0 is the starting wealth and the series has ``duration_minutes``
entries.  Minute ``t`` covers the half-open interval ``(60(t-1), 60t]``
seconds.  ``teamfights`` carries provider annotations and, when present,
replaces kill clustering.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

TEAMS = ("A", "B")


class CorpusError(ValueError):
    """Raised when match files fail validation; ``problems`` maps file to reason."""

    def __init__(self, message, problems=None):
        self.problems = dict(problems or {})
        if self.problems:
            message += ": " + "; ".join(f"{k}: {v}" for k, v in self.problems.items())
        super().__init__(message)


def other(team: str) -> str:
    return "B" if team == "A" else "A"


def minute_of(t_seconds: float) -> int:
    """1-indexed minute bucket; second 60 still belongs to minute 1."""
    return max(1, math.ceil(t_seconds / 60.0))


@dataclass(frozen=True)
class KillEvent:
    time: float
    killer_team: str

    def __post_init__(self):
        if self.time < 0:
            raise ValueError("kill time must be nonnegative")
        if self.killer_team not in TEAMS:
            raise ValueError(f"unknown team {self.killer_team!r}")

    @property
    def victim_team(self) -> str:
        return other(self.killer_team)


@dataclass(frozen=True)
class AnnotatedFight:
    end_time: float
    winner: str


@dataclass(frozen=True)
class MatchRecord:
    match_id: str
    duration: int
    winner: str
    wealth_A: np.ndarray
    wealth_B: np.ndarray
    kills: tuple = ()
    gc_kills: tuple | None = None
    teamfights: tuple | None = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.duration < 1:
            raise ValueError("duration must be at least one minute")
        if self.winner not in TEAMS:
            raise ValueError(f"winner must be 'A' or 'B', got {self.winner!r}")
        for name in ("wealth_A", "wealth_B"):
            w = getattr(self, name)
            if len(w) != self.duration:
                raise ValueError(f"{name} has {len(w)} entries, expected {self.duration}")
        times = [k.time for k in self.kills]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("kills must be time-ordered")

    def wealth(self, team: str) -> np.ndarray:
        return self.wealth_A if team == "A" else self.wealth_B

    def with_wealth(self, wealth_A, wealth_B) -> "MatchRecord":
        return replace(self, wealth_A=np.asarray(wealth_A), wealth_B=np.asarray(wealth_B))

    # JSON ---------------------------------------------------------------
    def to_dict(self) -> dict:
        d = {
            "match_id": self.match_id,
            "duration_minutes": self.duration,
            "winner": self.winner,
            "wealth_A": _plain(self.wealth_A),
            "wealth_B": _plain(self.wealth_B),
            "kills": [{"t_seconds": float(k.time), "killer": k.killer_team} for k in self.kills],
        }
        if self.gc_kills is not None:
            d["gc_kills"] = [{"t_seconds": float(t), "team": team} for t, team in self.gc_kills]
        if self.teamfights is not None:
            d["teamfights"] = [{"end_seconds": float(f.end_time), "winner": f.winner}
                               for f in self.teamfights]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MatchRecord":
        need = ("match_id", "duration_minutes", "winner", "wealth_A", "wealth_B", "kills")
        missing = [k for k in need if k not in d]
        if missing:
            raise ValueError(f"missing fields: {', '.join(missing)}")
        kills = tuple(KillEvent(float(k["t_seconds"]), k["killer"]) for k in d["kills"])
        gc = d.get("gc_kills")
        if gc is not None:
            gc = tuple((float(g["t_seconds"]), _team(g["team"])) for g in gc)
        fights = d.get("teamfights")
        if fights is not None:
            fights = tuple(AnnotatedFight(float(f["end_seconds"]), _team(f["winner"]))
                           for f in fights)
        return cls(str(d["match_id"]), int(d["duration_minutes"]), d["winner"],
                   np.asarray(d["wealth_A"], dtype=float), np.asarray(d["wealth_B"], dtype=float),
                   kills, gc, fights)

    def dumps(self) -> str:
        return json.dumps(self.to_dict()) + "\n"


def _team(t):
    if t not in TEAMS:
        raise ValueError(f"unknown team {t!r}")
    return t


def _plain(a):
    # integers stay integers in the JSON output
    return [int(v) if float(v).is_integer() else float(v) for v in np.asarray(a).tolist()]


def load_match(path) -> MatchRecord:
    return MatchRecord.from_dict(json.loads(Path(path).read_text()))


def load_corpus(directory) -> list:
    """Every ``*.json`` file in ``directory`` except run manifests, ordered by
    match id.

    Raises :class:`CorpusError` listing all offending files if any fails to
    parse or validate.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise CorpusError(f"corpus directory {directory} does not exist")
    files = sorted(f for f in directory.glob("*.json")
                   if not f.name.endswith(".manifest.json"))
    if not files:
        raise CorpusError(f"no match files in {directory}")
    matches, problems = [], {}
    for f in files:
        try:
            matches.append(load_match(f))
        except (ValueError, KeyError, TypeError) as exc:
            problems[f.name] = str(exc)
    if problems:
        raise CorpusError(f"{len(problems)} invalid match file(s)", problems)
    ids = [m.match_id for m in matches]
    if len(set(ids)) != len(ids):
        raise CorpusError("duplicate match ids in corpus")
    return sorted(matches, key=lambda m: m.match_id)


def save_corpus(matches, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for m in matches:
        (directory / f"{m.match_id}.json").write_text(m.dumps())
