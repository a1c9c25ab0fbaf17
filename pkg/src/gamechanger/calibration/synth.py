"""Synthetic match telemetry generated from a :class:`MobaModel`.

Teamfight kills are placed in seconds 45-59 of their minute and the
occasional skirmish of a farming minute in seconds 29-35, which keeps every
fight at least 30 seconds away from kills of other minutes.  Skirmishes are a
single kill or an even trade, so clustering discards them.
"""

from __future__ import annotations

import numpy as np

from ..moba.model import MobaModel
from ..moba.solver import simulate_games
from .records import KillEvent, MatchRecord

FIGHT_SECONDS = (45.0, 59.0)
SKIRMISH_SECONDS = (29.0, 35.0)
SKIRMISH_PROB = 0.3
TRADE_PROB = 0.1


def _rng(seed, *stream):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *stream])))


def _fight_kills(rng, minute, winner):
    loser = "B" if winner == "A" else "A"
    lost = int(rng.integers(0, 3))
    won = int(rng.integers(max(lost + 1, 2), 6))
    times = np.sort(rng.uniform(*FIGHT_SECONDS, size=lost + won)) + 60.0 * (minute - 1)
    killers = [winner] * won + [loser] * lost
    rng.shuffle(killers)
    return [KillEvent(float(round(t, 1)), k) for t, k in zip(times, killers)]


def _skirmish(rng, minute):
    base = 60.0 * (minute - 1)
    u = rng.random()
    if u < TRADE_PROB:
        t = np.sort(rng.uniform(*SKIRMISH_SECONDS, size=2)) + base
        first = "A" if rng.random() < 0.5 else "B"
        second = "B" if first == "A" else "A"
        return [KillEvent(float(round(t[0], 1)), first), KillEvent(float(round(t[1], 1)), second)]
    if u < SKIRMISH_PROB:
        t = rng.uniform(*SKIRMISH_SECONDS) + base
        return [KillEvent(float(round(t, 1)), "A" if rng.random() < 0.5 else "B")]
    return []


def synthesize_corpus(model: MobaModel, n_matches: int, seed: int) -> list:
    """``n_matches`` matches played under ``model`` with kill logs and
    Game Changer kills.  Deterministic in ``seed``."""
    if n_matches < 1:
        raise ValueError("n_matches must be >= 1")
    record = []
    won, _ = simulate_games(model, None, n_matches, _rng(seed, 0), record=record)
    rounds = {g: [] for g in range(n_matches)}
    for rec in record:
        for j, g in enumerate(rec["games"]):
            rounds[g].append({k: (rec[k][j] if k != "round" else rec[k])
                              for k in ("round", "w_A", "w_B", "fight", "a_wins", "ends",
                                        "gc_kill")})
    kill_rng = _rng(seed, 1)
    matches = []
    for g in range(n_matches):
        rs = rounds[g]
        duration = len(rs)
        kills, gc = [], []
        for r in rs:
            t = r["round"]
            if r["fight"]:
                team = "A" if r["a_wins"] else "B"
                fk = _fight_kills(kill_rng, t, team)
                kills += fk
                if r["gc_kill"]:
                    gc.append((fk[-1].time, team))
            else:
                kills += _skirmish(kill_rng, t)
        winner = "A" if won[g] else "B"
        wa = np.rint([r["w_A"] for r in rs])
        wb = np.rint([r["w_B"] for r in rs])
        matches.append(MatchRecord(f"syn{g:05d}", duration, winner, wa, wb, tuple(kills),
                                   tuple(gc)))
    return matches
