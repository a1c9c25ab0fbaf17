"""Backward induction for the MOBA model on a rounded wealth grid.

Values are stored only on *layers*, the rounds ``0, L, 2L, ...`` where ``L``
is the lookahead.  A layer state's win probability and surprise-to-go come
from expanding the exact transition tree ``L`` rounds ahead and reading the
rounded leaves from the next layer.  Inside the tree wealth is exact, so the
belief process is a martingale by construction and rounding enters only at
the leaves.

A forward pass decides which grid states each layer holds, carrying the
probability of reaching them; states below ``prune_mass`` are dropped.  A
leaf that rounds onto a dropped state borrows the value of the nearest stored
neighbour.  Both effects are reported on the result.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .model import MobaModel, teamfight_win_prob

DEFAULT_GRID_STEP = 250.0
DEFAULT_LOOKAHEAD = 5
DEFAULT_PRUNE_MASS = 1e-12


def _grid_index(w, step):
    return np.ceil(np.asarray(w, dtype=float) / step - 0.5).astype(np.int64)


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class _Rounds:
    R: np.ndarray
    QE: np.ndarray
    F: np.ndarray
    W: np.ndarray
    LO: np.ndarray

    @classmethod
    def of(cls, model: MobaModel):
        rnd = np.arange(model.horizon + 2, dtype=float)
        return cls(np.asarray(model.fight_prob(rnd), dtype=float),
                   np.asarray(model.end_prob(rnd), dtype=float),
                   np.asarray(model.delta_F(rnd), dtype=float),
                   np.asarray(model.delta_W(rnd), dtype=float),
                   np.asarray(model.delta_L(rnd), dtype=float))


def _clock_span(model: MobaModel) -> int:
    return max(model.initial_clock(), model.gc_respawn_delay) + 1


def _symmetric(model: MobaModel) -> bool:
    # equal ratings make the dynamics invariant under swapping the teams
    return model.lam == 1.0


def _decode(keys, step, nclock):
    k = keys // nclock
    return (k // K.KEY_SPAN) * step, (k % K.KEY_SPAN) * step, keys % nclock


def _root(model):
    # the initial state exactly, not its grid image; layer 0 holds only this
    return (np.array([float(model.w0_A)]), np.array([float(model.w0_B)]),
            np.array([model.initial_clock()], dtype=np.int64))


@dataclass
class Layer:
    t: int
    keys: np.ndarray
    mass: np.ndarray
    edge: np.ndarray = None  # winp - 1/2
    sur: np.ndarray = None

    @property
    def winp(self):
        return 0.5 + self.edge

    def __len__(self):
        return self.keys.size


@dataclass
class SolveResult:
    model: MobaModel
    grid_step: float
    lookahead: int
    layers: list
    root_winp: float = math.nan
    root_surprise: float = math.nan
    pruned_mass: float = 0.0
    borrowed_mass: float = 0.0
    approximated_mass: float = 0.0
    _rounds: _Rounds = field(default=None, repr=False)

    @property
    def n_states(self) -> int:
        return sum(len(l) for l in self.layers)

    def next_layer_time(self, t: int) -> int:
        """Round whose grid values close the exact expansion started at ``t``."""
        return min((t // self.lookahead + 1) * self.lookahead, self.model.horizon)

    def layer_at(self, t: int) -> Layer:
        if t % self.lookahead or t >= self.model.horizon:
            raise ValueError(f"round {t} is not a layer time")
        return self.layers[t // self.lookahead]

    def _values(self, t, wa, wb, clock, depth, reach, leaf_t):
        m = self.model
        ro = self._rounds
        if leaf_t >= m.horizon or leaf_t // self.lookahead >= len(self.layers):
            # past the horizon, or everything there was pruned
            keys, vw, vs = np.empty(0, np.int64), np.empty(0), np.empty(0)
        else:
            nxt = self.layer_at(leaf_t)
            keys, vw, vs = nxt.keys, nxt.edge, nxt.sur
        return K.values(wa, wb, clock, t + 1, depth, reach, ro.R, ro.QE, ro.F, ro.W, ro.LO,
                        float(m.lam), float(m.theta), float(m.delta_GC),
                        np.int64(m.gc_respawn_delay), keys, vw, vs, float(self.grid_step),
                        np.int64(_clock_span(m)), _symmetric(m))

    def values_at(self, t: int, wa, wb, clock):
        """(winp, sur) at exact states entering round ``t + 1``.

        The tree is expanded exactly up to the next layer.
        """
        wa = np.atleast_1d(np.asarray(wa, dtype=float))
        wb = np.atleast_1d(np.asarray(wb, dtype=float))
        clock = np.atleast_1d(np.asarray(clock, dtype=np.int64))
        nxt = self.next_layer_time(t)
        d, s, _ = self._values(t, wa, wb, clock, nxt - t, np.zeros(wa.size), nxt)
        return 0.5 + d, s

    def belief(self, t: int, wa, wb, clock):
        return self.values_at(t, wa, wb, clock)[0]

    def belief_many(self, t: int, wa, wb, clock):
        """:meth:`belief` over a batch, evaluating each distinct state once."""
        rows = np.stack([np.asarray(wa, dtype=float), np.asarray(wb, dtype=float),
                         np.asarray(clock, dtype=float)], axis=1)
        uniq, inv = np.unique(rows, axis=0, return_inverse=True)
        b = self.belief(t, uniq[:, 0], uniq[:, 1], uniq[:, 2].astype(np.int64))
        return b[inv.reshape(-1)]

    def grid_values(self, t: int, wa, wb, clock):
        """Stored layer values after rounding to the grid (no fallback)."""
        layer = self.layer_at(t)
        nclock = _clock_span(self.model)
        sym = _symmetric(self.model)
        ka = _grid_index(wa, self.grid_step)
        kb = _grid_index(wb, self.grid_step)
        flip = sym & (ka < kb)
        keys = (np.where(flip, kb, ka) * K.KEY_SPAN + np.where(flip, ka, kb)) * nclock \
            + np.asarray(clock, dtype=np.int64)
        idx = np.minimum(np.searchsorted(layer.keys, keys), layer.keys.size - 1)
        if not np.all(layer.keys[idx] == keys):
            raise KeyError(f"state not stored at round {t}")
        return 0.5 + np.where(flip, -1.0, 1.0) * layer.edge[idx], layer.sur[idx]


def check_grid(model: MobaModel, grid_step: float):
    if not grid_step > 0:
        raise GridError("grid_step must be positive")
    points = model.max_round_income() / grid_step
    if points < 10:
        raise GridError(
            f"grid_step {grid_step} is too coarse: one round's max income spans "
            f"{points:.1f} grid points (need at least 10)")


def solve(model: MobaModel, grid_step: float = DEFAULT_GRID_STEP,
          lookahead: int = DEFAULT_LOOKAHEAD,
          prune_mass: float = DEFAULT_PRUNE_MASS) -> SolveResult:
    """Backward induction from the horizon to the initial state."""
    check_grid(model, grid_step)
    if lookahead < 1:
        raise ValueError("lookahead must be >= 1")
    H = model.horizon
    nclock = np.int64(_clock_span(model))
    ro = _Rounds.of(model)
    step = float(grid_step)
    args = (ro.R, ro.QE, ro.F, ro.W, ro.LO, float(model.lam), float(model.theta),
            float(model.delta_GC), np.int64(model.gc_respawn_delay))

    sym = _symmetric(model)
    root = K.encode(float(model.w0_A), float(model.w0_B), model.initial_clock(), step, nclock,
                    sym)
    layers = [Layer(0, np.array([root], dtype=np.int64), np.ones(1))]
    pruned = 0.0
    for t in range(lookahead, H, lookahead):
        prev = layers[-1]
        if prev.t == 0:
            wa, wb, ck = _root(model)
        else:
            wa, wb, ck = _decode(prev.keys, step, nclock)
        lk, lm = K.leaves(wa, wb, ck, t - lookahead + 1, lookahead, prev.mass, *args, step, nclock,
                          sym)
        keys, inv = np.unique(lk, return_inverse=True)
        mass = np.bincount(inv, weights=lm, minlength=keys.size)
        keep = mass >= prune_mass
        pruned += float(mass[~keep].sum())
        if not keep.any():
            break
        layers.append(Layer(t, keys[keep], mass[keep]))

    res = SolveResult(model, step, lookahead, layers, pruned_mass=pruned, _rounds=ro)
    for i in range(len(layers) - 1, -1, -1):
        layer = layers[i]
        t = layer.t
        leaf_t = min(t + lookahead, H)
        depth = leaf_t - t
        if t == 0:
            wa, wb, ck = _root(model)
        else:
            wa, wb, ck = _decode(layer.keys, step, nclock)
        layer.edge, layer.sur, stats = res._values(t, wa, wb, ck, depth, layer.mass, leaf_t)
        res.borrowed_mass += float(stats[0])
        res.approximated_mass += float(stats[1])

    res.root_winp = float(layers[0].winp[0])
    res.root_surprise = float(layers[0].sur[0])
    return res


# Monte Carlo ---------------------------------------------------------------

@dataclass(frozen=True)
class MobaMcEstimate:
    winp: float
    winp_se: float
    surprise: float
    surprise_se: float
    episodes: int


def _rng(seed, *stream):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *stream])))


def _se(a):
    return float(a.std(ddof=1) / math.sqrt(a.size)) if a.size > 1 else 0.0


def mc_solve(model: MobaModel, episodes: int, seed: int, result: SolveResult | None = None,
             grid_step: float = DEFAULT_GRID_STEP, lookahead: int = DEFAULT_LOOKAHEAD,
             chunk: int = 10_000) -> MobaMcEstimate:
    """Simulate games with exact wealth, reading each round's belief from ``result``.

    Chunk ``k`` of the episodes draws from the random stream ``(seed, k)``.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if result is None:
        result = solve(model, grid_step, lookahead)
    wins = np.empty(episodes)
    surprise = np.empty(episodes)
    for k, start in enumerate(range(0, episodes, chunk)):
        n = min(chunk, episodes - start)
        w, s = simulate_games(model, result, n, _rng(seed, k))
        wins[start:start + n] = w
        surprise[start:start + n] = s
    return MobaMcEstimate(float(wins.mean()), _se(wins), float(surprise.mean()), _se(surprise),
                          episodes)


def simulate_games(model: MobaModel, result: SolveResult | None, n: int, rng,
                   record=None):
    """Play ``n`` games.  Returns (A won, overall surprise) arrays.

    With ``result=None`` beliefs are skipped and the surprise is NaN.  If
    ``record`` is a list, one dict per round is appended with the pre-round
    wealth, round type and winner of every live game (used to synthesize
    telemetry).
    """
    wa = np.full(n, float(model.w0_A))
    wb = np.full(n, float(model.w0_B))
    ck = np.full(n, model.initial_clock(), dtype=np.int64)
    bel = result.belief_many(0, wa, wb, ck) if result is not None else np.zeros(n)
    total = np.zeros(n)
    won = np.zeros(n)
    alive = np.arange(n)
    delay = model.gc_respawn_delay
    for t in range(model.horizon):
        if not alive.size:
            break
        rnd = t + 1
        r = float(model.fight_prob(rnd))
        qe = float(model.end_prob(rnd))
        f, w, l = model.delta_F(rnd), model.delta_W(rnd), model.delta_L(rnd)
        u = rng.random((3, alive.size))
        A, B, C = wa[alive], wb[alive], ck[alive]
        pa = teamfight_win_prob(A, B, model.lam, model.theta)
        fight = u[0] < r
        a_wins = u[1] < pa
        ends = fight & (u[2] < qe)
        avail = C == 0
        if record is not None:
            record.append(dict(round=rnd, games=alive.copy(), w_A=A.copy(), w_B=B.copy(),
                               fight=fight.copy(), a_wins=a_wins.copy(), ends=ends.copy(),
                               gc_kill=(fight & avail & ~ends).copy()))

        idx_end = alive[ends]
        outcome = a_wins[ends].astype(float)
        won[idx_end] = outcome
        total[idx_end] += np.abs(outcome - bel[idx_end])

        keep = ~ends
        A, B, C = A[keep], B[keep], C[keep]
        fight, a_wins, avail = fight[keep], a_wins[keep], avail[keep]
        bonus = np.where(avail, model.delta_GC, 0.0)
        tick = np.maximum(C - 1, 0)
        alive = alive[keep]
        wa[alive] = A + np.where(fight, np.where(a_wins, w + bonus, l), f)
        wb[alive] = B + np.where(fight, np.where(a_wins, l, w + bonus), f)
        ck[alive] = np.where(fight, np.where(avail, delay, tick), tick)
        if alive.size and result is not None:
            nb = result.belief_many(rnd, wa[alive], wb[alive], ck[alive])
            total[alive] += np.abs(nb - bel[alive])
            bel[alive] = nb
    if alive.size:
        raise RuntimeError("games survived past the horizon")
    if result is None:
        total[:] = np.nan
    return won, total


# Optimization over the Game Changer reward ----------------------------------

@dataclass
class GcPoint:
    delta_gc: float
    surprise: float
    winp: float


@dataclass
class GcOptimum:
    lam: float
    delta_gc_star: float
    max_surprise: float
    curve: list


def _solve_point(args):
    model, gc, grid_step, lookahead, prune_mass = args
    res = solve(model.with_(delta_GC=gc), grid_step, lookahead, prune_mass)
    return GcPoint(float(gc), res.root_surprise, res.root_winp)


def _run(tasks, workers):
    if workers and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_solve_point, tasks))
    return [_solve_point(t) for t in tasks]


def _best(curve):
    # strict improvement only, so ties keep the smaller reward
    best = curve[0]
    for pt in curve[1:]:
        if pt.surprise > best.surprise:
            best = pt
    return best


def _checked_grid(gc_grid):
    grid = sorted(float(g) for g in gc_grid)
    if not grid:
        raise ValueError("gc_grid must not be empty")
    return grid


def optimize_gc(model: MobaModel, gc_grid, grid_step: float = DEFAULT_GRID_STEP,
                lookahead: int = DEFAULT_LOOKAHEAD, workers: int | None = None,
                prune_mass: float = DEFAULT_PRUNE_MASS) -> GcOptimum:
    """Evaluate every candidate reward and return the surprise-maximizing one."""
    grid = _checked_grid(gc_grid)
    curve = _run([(model, g, grid_step, lookahead, prune_mass) for g in grid], workers)
    best = _best(curve)
    return GcOptimum(model.lam, best.delta_gc, best.surprise, curve)


def sweep_lambda(model: MobaModel, lambdas, gc_grid, grid_step: float = DEFAULT_GRID_STEP,
                 lookahead: int = DEFAULT_LOOKAHEAD, workers: int | None = None,
                 prune_mass: float = DEFAULT_PRUNE_MASS) -> list:
    """One :class:`GcOptimum` per rating ratio."""
    lambdas = [float(x) for x in lambdas]
    if any(x < 1 for x in lambdas):
        raise ValueError("rating ratios below 1 are covered by swapping the teams")
    grid = _checked_grid(gc_grid)
    tasks = [(model.with_(lam=lam), g, grid_step, lookahead, prune_mass)
             for lam in lambdas for g in grid]
    points = _run(tasks, workers)
    out = []
    for i, lam in enumerate(lambdas):
        curve = points[i * len(grid):(i + 1) * len(grid)]
        best = _best(curve)
        out.append(GcOptimum(lam, best.delta_gc, best.surprise, curve))
    return out
