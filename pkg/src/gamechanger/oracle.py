"""Independent numerical oracles for the Quidditch model.

``dp_solve`` iterates the belief recurrence on a truncated score window and
pushes probability mass forward to count visits; nothing here evaluates the
closed forms in :mod:`gamechanger.quidditch`.  The Monte Carlo simulators play
the game round by round and read beliefs from a :class:`DpSolution`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quidditch import QuidditchParams

MAX_EPISODE_ROUNDS = 10_000_000
_CHUNK = 20_000


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


def default_window(params: QuidditchParams, x: int) -> int:
    return math.ceil(40.0 / params.q) + int(x)


@dataclass
class DpSolution:
    """Beliefs and visit counts on ``delta in [-window, window]``."""

    params: QuidditchParams
    x: int
    window: int
    deltas: np.ndarray
    belief_table: np.ndarray
    visit_table: np.ndarray
    expected_surprise: float
    iterations: int

    def belief_at(self, delta):
        """Table lookup with the clamped boundary values outside the window."""
        d = np.asarray(delta)
        idx = np.clip(d + self.window, 0, 2 * self.window)
        out = self.belief_table[idx]
        out = np.where(d > self.window, 1.0, np.where(d < -self.window, 0.0, out))
        return out if out.ndim else float(out)

    def visits_at(self, delta):
        d = np.asarray(delta)
        inside = np.abs(d) <= self.window
        out = np.where(inside, self.visit_table[np.clip(d + self.window, 0, 2 * self.window)], 0.0)
        return out if out.ndim else float(out)


def _catch_value(deltas, x, p):
    # probability Gryffindor wins if the Snitch is caught now
    return np.where(deltas > x, 1.0, np.where(deltas < -x, 0.0, p))


def dp_solve(params: QuidditchParams, x: int, window: int | None = None,
             tol: float = 1e-12, max_iter: int = 1_000_000) -> DpSolution:
    """Solve beliefs by fixed-point sweeps and visits by forward flow."""
    p, q = params.p, params.q
    x = int(x)
    if window is None:
        window = default_window(params, x)
    if window < x + 1:
        raise ValueError(f"window must be at least x + 1 = {x + 1}, got {window}")
    deltas = np.arange(-window, window + 1)
    catch = q * _catch_value(deltas, x, p)

    # Jacobi sweeps: b = (1-q)(p b[+1] + (1-p) b[-1]) + q*catch, clamped to 1/0 outside
    b = _catch_value(deltas, x, p).astype(float)
    padded = np.empty(b.size + 2)
    padded[0], padded[-1] = 0.0, 1.0
    residual = math.inf
    for it in range(1, max_iter + 1):
        padded[1:-1] = b
        new = (1 - q) * (p * padded[2:] + (1 - p) * padded[:-2]) + catch
        residual = float(np.max(np.abs(new - b)))
        b = new
        if residual < tol:
            break
    else:
        raise ConvergenceError("belief sweep did not converge", residual)
    iterations = it

    # forward flow of the surviving mass from delta = 0
    v = np.zeros_like(b)
    mass = np.zeros_like(b)
    mass[window] = 1.0
    for _ in range(max_iter):
        v += mass
        nxt = np.zeros_like(mass)
        nxt[1:] += p * mass[:-1]
        nxt[:-1] += (1 - p) * mass[1:]
        mass = (1 - q) * nxt
        if mass.sum() < 1e-17:
            break
    else:
        raise ConvergenceError("visit flow did not drain", float(mass.sum()))

    padded[1:-1] = b
    up, down = padded[2:], padded[:-2]
    step = (1 - q) * (p * np.abs(up - b) + (1 - p) * np.abs(b - down))
    final = q * np.where(deltas > x, 1 - b, np.where(deltas < -x, b, p * (1 - b) + (1 - p) * b))
    expected = math.fsum(((step + final) * v).tolist())
    return DpSolution(params, x, window, deltas, b, v, expected, iterations)


@dataclass
class EpisodeTrace:
    states: list
    beliefs: list
    surprise_total: float
    winner: str

    @property
    def rounds(self) -> int:
        return len(self.states) - 1


def _rng(seed, *stream):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *stream])))


def simulate_episode(params: QuidditchParams, x: int, seed: int,
                     solution: DpSolution | None = None) -> EpisodeTrace:
    """Play one game; ``states`` ends with ``"G"`` or ``"S"``."""
    if solution is None:
        solution = dp_solve(params, x)
    rng = _rng(seed)
    p, q = params.p, params.q
    delta = 0
    states = [0]
    beliefs = [solution.belief_at(0)]
    for _ in range(MAX_EPISODE_ROUNDS):
        u, v = rng.random(2)
        if u < q:
            g_catches = v < p
            if delta > x:
                winner = "G"
            elif delta < -x:
                winner = "S"
            else:
                winner = "G" if g_catches else "S"
            states.append(winner)
            beliefs.append(1.0 if winner == "G" else 0.0)
            break
        delta += 1 if v < p else -1
        states.append(delta)
        beliefs.append(solution.belief_at(delta))
    else:
        raise RuntimeError(f"episode exceeded {MAX_EPISODE_ROUNDS} rounds")
    total = math.fsum(abs(b1 - b0) for b0, b1 in zip(beliefs, beliefs[1:]))
    return EpisodeTrace(states, beliefs, total, states[-1])


@dataclass
class BatchResult:
    surprise: np.ndarray
    g_wins: np.ndarray
    rounds: np.ndarray
    visited: dict


def simulate_batch(params: QuidditchParams, x: int, episodes: int, seed: int,
                   solution: DpSolution | None = None, track=()) -> BatchResult:
    """Vectorized episodes.  Chunk ``k`` of 20000 episodes draws from the
    stream ``(seed, k)``, so results do not depend on evaluation order.

    ``track`` lists score differences whose visits are recorded per episode.
    """
    if solution is None:
        solution = dp_solve(params, x)
    p, q = params.p, params.q
    surprise = np.empty(episodes)
    g_wins = np.empty(episodes, dtype=bool)
    rounds = np.empty(episodes, dtype=np.int64)
    visited = {d: np.zeros(episodes, dtype=bool) for d in track}
    for k, start in enumerate(range(0, episodes, _CHUNK)):
        n = min(_CHUNK, episodes - start)
        rng = _rng(seed, k)
        delta = np.zeros(n, dtype=np.int64)
        bel = np.full(n, solution.belief_at(0))
        tot = np.zeros(n)
        length = np.zeros(n, dtype=np.int64)
        win = np.zeros(n, dtype=bool)
        alive = np.arange(n)
        for d in track:
            visited[d][start:start + n] |= d == 0
        steps = 0
        while alive.size:
            steps += 1
            if steps > MAX_EPISODE_ROUNDS:
                raise RuntimeError(f"episode exceeded {MAX_EPISODE_ROUNDS} rounds")
            u = rng.random(alive.size)
            v = rng.random(alive.size)
            length[alive] += 1
            caught = u < q
            dl = delta[alive]
            g = np.where(dl > x, True, np.where(dl < -x, False, v < p))
            ci = alive[caught]
            win[ci] = g[caught]
            tot[ci] += np.abs(g[caught].astype(float) - bel[ci])
            alive = alive[~caught]
            vv = v[~caught]
            delta[alive] += np.where(vv < p, 1, -1)
            nb = solution.belief_at(delta[alive])
            tot[alive] += np.abs(nb - bel[alive])
            bel[alive] = nb
            for d in track:
                visited[d][start + alive] |= delta[alive] == d
        surprise[start:start + n] = tot
        g_wins[start:start + n] = win
        rounds[start:start + n] = length
    return BatchResult(surprise, g_wins, rounds, visited)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    episodes: int

    @property
    def std_error_defined(self) -> bool:
        return self.episodes > 1


def mc_surprise(params: QuidditchParams, x: int, episodes: int, seed: int,
                solution: DpSolution | None = None) -> McEstimate:
    """Sample mean and standard error of the overall surprise."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    s = simulate_batch(params, x, episodes, seed, solution).surprise
    se = float(s.std(ddof=1) / math.sqrt(episodes)) if episodes > 1 else 0.0
    return McEstimate(float(s.mean()), se, episodes)
