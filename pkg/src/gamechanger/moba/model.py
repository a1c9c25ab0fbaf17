"""The MOBA round model: wealth accumulation, teamfights and the Game Changer."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

CURVE_FIELDS = ("r", "q_end", "delta_F", "delta_W", "delta_L")
SCALAR_FIELDS = ("theta", "lambda", "delta_GC", "gc_spawn_round", "gc_respawn_delay",
                 "w0_A", "w0_B", "horizon")


class PiecewiseLinear:
    """Linear interpolation through ``[[t, value], ...]`` breakpoints, constant
    beyond the first and last breakpoint."""

    def __init__(self, points):
        pts = [(float(t), float(v)) for t, v in points]
        if not pts:
            raise ValueError("a piecewise-linear curve needs at least one breakpoint")
        ts = [t for t, _ in pts]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"breakpoints must be strictly increasing: {ts}")
        self.points = pts
        self._t = np.array(ts)
        self._v = np.array([v for _, v in pts])

    def __call__(self, t):
        out = np.interp(t, self._t, self._v)
        return out if np.ndim(out) else float(out)

    def __eq__(self, other):
        return isinstance(other, PiecewiseLinear) and self.points == other.points

    def __repr__(self):
        return f"PiecewiseLinear({self.points!r})"

    def to_list(self):
        return [[t, v] for t, v in self.points]

    @classmethod
    def constant(cls, value):
        return cls([(0.0, value)])


@dataclass(frozen=True)
class MobaModel:
    r: PiecewiseLinear
    q_end: PiecewiseLinear
    delta_F: PiecewiseLinear
    delta_W: PiecewiseLinear
    delta_L: PiecewiseLinear
    theta: float
    lam: float = 1.0
    delta_GC: float = 0.0
    gc_spawn_round: int = 20
    gc_respawn_delay: int = 6
    w0_A: float = 2500.0
    w0_B: float = 2500.0
    horizon: int = 100
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if self.delta_GC < 0:
            raise ValueError("delta_GC must be nonnegative")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.gc_spawn_round < 1 or self.gc_respawn_delay < 0:
            raise ValueError("invalid Game Changer schedule")
        if self.w0_A <= 0 or self.w0_B <= 0:
            raise ValueError("initial wealth must be positive")
        t = np.arange(1, self.horizon + 1)
        for name in ("r", "q_end"):
            v = getattr(self, name)(t)
            if np.any(v < 0) or np.any(v > 1):
                raise ValueError(f"{name}(t) must lie in [0, 1]")
        f, w, l = self.delta_F(t), self.delta_W(t), self.delta_L(t)
        if np.any(f < 0) or np.any(l < 0):
            raise ValueError("incomes must be nonnegative")
        if np.any(w <= l):
            raise ValueError("delta_W(t) must exceed delta_L(t)")

    # Round-indexed parameters.  The final round is a forced decisive
    # teamfight so every game is absorbed by the horizon.
    def fight_prob(self, t):
        return np.where(np.asarray(t) >= self.horizon, 1.0, self.r(t))

    def end_prob(self, t):
        return np.where(np.asarray(t) >= self.horizon, 1.0, self.q_end(t))

    def initial_clock(self) -> int:
        return max(self.gc_spawn_round - 1, 0)

    def max_round_income(self) -> float:
        t = np.arange(1, self.horizon + 1)
        return float(np.max(np.maximum(self.delta_F(t), self.delta_W(t))))

    def with_(self, **changes) -> "MobaModel":
        if "lambda" in changes:
            changes["lam"] = changes.pop("lambda")
        return replace(self, **changes)

    def swapped(self) -> "MobaModel":
        """Relabel the teams: A <-> B, lambda -> 1/lambda."""
        return replace(self, lam=1.0 / self.lam, w0_A=self.w0_B, w0_B=self.w0_A)

    # serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        d = {name: getattr(self, name).to_list() for name in CURVE_FIELDS}
        d.update(theta=self.theta, **{"lambda": self.lam}, delta_GC=self.delta_GC,
                 gc_spawn_round=self.gc_spawn_round, gc_respawn_delay=self.gc_respawn_delay,
                 w0_A=self.w0_A, w0_B=self.w0_B, horizon=self.horizon)
        if self.meta:
            d["meta"] = self.meta
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MobaModel":
        missing = [k for k in CURVE_FIELDS + SCALAR_FIELDS if k not in d]
        if missing:
            raise ValueError(f"config is missing fields: {', '.join(missing)}")
        curves = {k: PiecewiseLinear(d[k]) for k in CURVE_FIELDS}
        return cls(**curves, theta=d["theta"], lam=d["lambda"], delta_GC=d["delta_GC"],
                   gc_spawn_round=int(d["gc_spawn_round"]),
                   gc_respawn_delay=int(d["gc_respawn_delay"]),
                   w0_A=d["w0_A"], w0_B=d["w0_B"], horizon=int(d["horizon"]),
                   meta=d.get("meta", {}))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def loads(cls, text: str) -> "MobaModel":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "MobaModel":
        return cls.loads(Path(path).read_text())


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z)))


def teamfight_win_prob(w_A, w_B, lam, theta):
    """Probability that team A wins a teamfight.

    Works elementwise on arrays.  The relative advantage is measured against
    the weaker side, so the two branches mirror each other.
    """
    w_A = np.asarray(w_A, dtype=float)
    w_B = np.asarray(w_B, dtype=float)
    if np.any(w_A <= 0) or np.any(w_B <= 0):
        raise ValueError("team wealth must be positive")
    if theta <= 0 or lam <= 0:
        raise ValueError("theta and lambda must be positive")
    a = lam * w_A
    ahead = a >= w_B
    # evaluate each branch only where it applies
    z = np.where(ahead, (a - w_B) / w_B, (w_B - a) / a)
    s = sigmoid(theta * z)
    out = np.where(ahead, s, 1.0 - s)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class MobaState:
    t: int
    w_A: float
    w_B: float
    gc_clock: int


A_WINS = "A"
B_WINS = "B"


def transition(model: MobaModel, state: MobaState):
    """One-round distribution as a list of ``(probability, outcome)``.

    ``outcome`` is a :class:`MobaState` or one of ``A_WINS`` / ``B_WINS``.
    Zero-probability branches are dropped.
    """
    if state.t >= model.horizon:
        raise ValueError("no transitions from the horizon")
    rnd = state.t + 1
    r = float(model.fight_prob(rnd))
    qe = float(model.end_prob(rnd))
    f, w, l = model.delta_F(rnd), model.delta_W(rnd), model.delta_L(rnd)
    pa = teamfight_win_prob(state.w_A, state.w_B, model.lam, model.theta)
    available = state.gc_clock == 0
    bonus = model.delta_GC if available else 0.0
    clock_fight = model.gc_respawn_delay if available else max(state.gc_clock - 1, 0)
    clock_farm = max(state.gc_clock - 1, 0)

    out = [
        (1 - r, MobaState(rnd, state.w_A + f, state.w_B + f, clock_farm)),
        (r * pa * qe, A_WINS),
        (r * pa * (1 - qe), MobaState(rnd, state.w_A + w + bonus, state.w_B + l, clock_fight)),
        (r * (1 - pa) * qe, B_WINS),
        (r * (1 - pa) * (1 - qe), MobaState(rnd, state.w_A + l, state.w_B + w + bonus, clock_fight)),
    ]
    return [(pr, o) for pr, o in out if pr > 0]


def load_shipped_config(name: str) -> MobaModel:
    """Load ``lol`` or ``dota2`` from the bundled example configs."""
    from importlib import resources

    text = resources.files("gamechanger.configs").joinpath(f"{name}.json").read_text()
    return MobaModel.loads(text)


def grid_round(w, step):
    """Nearest multiple of ``step``; exact halves go to the lower point."""
    return np.ceil(np.asarray(w, dtype=float) / step - 0.5) * step

