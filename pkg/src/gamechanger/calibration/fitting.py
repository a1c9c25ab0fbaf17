"""Per-minute estimates and piecewise-linear / sigmoid fits of the MOBA model."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import lsq_linear, minimize_scalar

from ..moba.model import MobaModel, PiecewiseLinear
from .stripping import RewardConfig, strip_gc_rewards
from .teamfights import FIGHT, label_rounds, match_teamfights

MIN_USABLE_MINUTES = 10
THETA_BOUNDS = (1e-9, 100.0)
THETA_XTOL = 1e-4

# Game Changer schedules used when a fitted config is written out
GC_SCHEDULE = {"lol": (20, 6), "dota2": (10, 10)}


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class FitConfig:
    r_segments: int = 2
    q_segments: int = 3
    income_segments: int = 3

    def __post_init__(self):
        if self.r_segments < 1 or self.q_segments < 1 or self.income_segments < 1:
            raise ValueError("segment counts must be positive")


@dataclass
class Empirical:
    """Per-minute raw estimates.  NaN marks minutes without observations."""

    minutes: np.ndarray
    alive: np.ndarray
    fights: np.ndarray
    ends: np.ndarray
    r_hat: np.ndarray
    q_hat: np.ndarray
    dF_hat: np.ndarray
    dW_hat: np.ndarray
    dL_hat: np.ndarray
    n_farm: np.ndarray
    n_fight: np.ndarray


def _mean(total, count):
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(count > 0, total / np.maximum(count, 1), np.nan)


def empirical_estimates(matches, labels) -> Empirical:
    """Aggregate labelled matches into per-minute estimates.

    ``matches`` should already have the Game Changer rewards stripped.
    Incomes come from consecutive wealth entries, so the final minute of a
    match (which ends the game) contributes to the fight counts only.
    """
    T = max(m.duration for m in matches)
    alive = np.zeros(T + 1)
    fights = np.zeros(T + 1)
    ends = np.zeros(T + 1)
    farm = np.zeros(T + 1)
    n_farm = np.zeros(T + 1)
    win = np.zeros(T + 1)
    lose = np.zeros(T + 1)
    n_fight = np.zeros(T + 1)
    for m, labs in zip(matches, labels):
        alive[1:m.duration + 1] += 1
        ends[m.duration] += 1
        inc_A = np.diff(m.wealth_A)
        inc_B = np.diff(m.wealth_B)
        for lab in labs:
            t = lab.minute
            if lab.kind == FIGHT:
                fights[t] += 1
            if lab.final:
                continue
            a, b = inc_A[t - 1], inc_B[t - 1]
            if lab.kind == FIGHT:
                w, l = (a, b) if lab.winner == "A" else (b, a)
                win[t] += w
                lose[t] += l
                n_fight[t] += 1
            else:
                farm[t] += 0.5 * (a + b)
                n_farm[t] += 1
    sl = slice(1, T + 1)
    return Empirical(
        minutes=np.arange(1, T + 1), alive=alive[sl], fights=fights[sl], ends=ends[sl],
        r_hat=_mean(fights, alive)[sl], q_hat=_mean(ends, fights)[sl],
        dF_hat=_mean(farm, n_farm)[sl], dW_hat=_mean(win, n_fight)[sl],
        dL_hat=_mean(lose, n_fight)[sl], n_farm=n_farm[sl], n_fight=n_fight[sl])


# Piecewise-linear least squares ---------------------------------------------

@dataclass
class PwlFit:
    curve: PiecewiseLinear
    rss: float
    rms: float


def _basis(t, knots):
    eye = np.eye(len(knots))
    return np.stack([np.interp(t, knots, eye[j]) for j in range(len(knots))], axis=1)


def fit_piecewise(t, y, w, segments: int, plateau: bool = False, monotone: bool = False,
                  bounds=(-np.inf, np.inf)) -> PwlFit:
    """Weighted least-squares continuous piecewise-linear fit.

    Knots sit on integer minutes and are searched exhaustively.  The first
    knot is the first observed minute.  With ``plateau`` the last segment is
    the constant tail after the final knot, which is free; otherwise the final
    knot is the last observed minute.  ``monotone`` forces nondecreasing
    values.  ``bounds`` clamps the knot values.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    ok = np.isfinite(y) & (w > 0)
    t, y, w = t[ok], y[ok], w[ok]
    if t.size < 2:
        raise FitError("need at least two observed minutes for a piecewise-linear fit")
    lo, hi = int(t.min()), int(t.max())
    sw = np.sqrt(w)
    # the constant tail counts as the last segment of a plateau fit
    inner = range(lo + 1, hi + 1) if plateau else range(lo + 1, hi)
    if math.comb(len(inner), segments - 1) == 0:
        raise FitError(f"too few minutes ({hi - lo + 1}) for {segments} segments")
    combos = itertools.combinations(inner, segments - 1)
    best = None
    for combo in combos:
        knots = [float(lo), *map(float, combo)]
        if not plateau:
            knots.append(float(hi))
        A = _basis(t, knots) * sw[:, None]
        b = y * sw
        if monotone:
            # values as cumulative sums of a free start and nonnegative increments
            L = np.tril(np.ones((len(knots), len(knots))))
            lower = np.r_[bounds[0], np.zeros(len(knots) - 1)]
            upper = np.r_[bounds[1], np.full(len(knots) - 1, np.inf)]
            sol = lsq_linear(A @ L, b, bounds=(lower, upper), method="bvls")
            v = np.clip(L @ sol.x, *bounds)
        elif np.isfinite(bounds[0]) or np.isfinite(bounds[1]):
            v = lsq_linear(A, b, bounds=bounds, method="bvls").x
        else:
            v = np.linalg.lstsq(A, b, rcond=None)[0]
        rss = float(np.sum((A @ v - b) ** 2))
        if best is None or rss < best[0] - 1e-12 * max(1.0, best[0]):
            best = (rss, knots, v)
    rss, knots, v = best
    return PwlFit(PiecewiseLinear(list(zip(knots, v.tolist()))), rss,
                  math.sqrt(rss / float(np.sum(w))))


# Sigmoid steepness -----------------------------------------------------------

def relative_gap(w_A, w_B):
    """Signed relative wealth advantage of team A as used by p_theta at lambda = 1."""
    w_A = np.asarray(w_A, dtype=float)
    w_B = np.asarray(w_B, dtype=float)
    return (w_A - w_B) / np.minimum(w_A, w_B)


def theta_log_likelihood(theta, z, a_won):
    s = np.where(a_won, 1.0, -1.0)
    return -float(np.sum(np.logaddexp(0.0, -theta * s * z)))


def fit_theta(w_A, w_B, a_won) -> float:
    """Maximum-likelihood sigmoid steepness with the rating ratio fixed to 1."""
    a_won = np.asarray(a_won, dtype=bool)
    if a_won.size == 0:
        raise FitError("no teamfights to fit theta")
    if a_won.all() or not a_won.any():
        raise FitError(f"all {a_won.size} teamfights have the same winner; theta is not identified")
    z = relative_gap(w_A, w_B)
    if not np.any(z != 0):
        raise FitError("every teamfight is wealth-balanced; the likelihood is flat in theta")
    res = minimize_scalar(lambda th: -theta_log_likelihood(th, z, a_won), bounds=THETA_BOUNDS,
                          method="bounded", options={"xatol": THETA_XTOL})
    if THETA_BOUNDS[1] - res.x < 10 * THETA_XTOL:
        raise FitError("likelihood still increasing at theta = 100; outcomes look deterministic")
    return float(res.x)


def teamfight_samples(matches, labels):
    """(w_A, w_B, A won) before every labelled teamfight round."""
    wa, wb, won = [], [], []
    for m, labs in zip(matches, labels):
        for lab in labs:
            if lab.kind == FIGHT:
                wa.append(m.wealth_A[lab.minute - 1])
                wb.append(m.wealth_B[lab.minute - 1])
                won.append(lab.winner == "A")
    return np.array(wa, dtype=float), np.array(wb, dtype=float), np.array(won, dtype=bool)


# Whole pipeline --------------------------------------------------------------

CURVE_KEYS = ("r", "q_end", "delta_F", "delta_W", "delta_L")


@dataclass
class FittedParams:
    curves: dict
    theta: float
    empirical: Empirical
    rms: dict
    w0: float
    game: str
    reward: float
    n_matches: int
    n_teamfights: int
    sample_counts: dict = field(default_factory=dict)

    def to_model(self, horizon: int = 100) -> MobaModel:
        spawn, delay = GC_SCHEDULE[self.game]
        meta = {"game": self.game, "source": f"fitted from {self.n_matches} matches"}
        return MobaModel(**self.curves, theta=self.theta, lam=1.0, delta_GC=self.reward,
                         gc_spawn_round=spawn, gc_respawn_delay=delay, w0_A=self.w0,
                         w0_B=self.w0, horizon=horizon, meta=meta)

    def diagnostics(self):
        """Rows of (minute, r_hat, q_hat, dF_hat, dW_hat, dL_hat, n_obs)."""
        e = self.empirical
        return [(int(t), e.r_hat[i], e.q_hat[i], e.dF_hat[i], e.dW_hat[i], e.dL_hat[i],
                 int(e.alive[i])) for i, t in enumerate(e.minutes)]


def fit_curves(emp: Empirical, config: FitConfig = FitConfig()) -> tuple:
    """Fit all five curves; returns (curves, rms) dictionaries."""
    usable = int(np.sum(emp.alive > 0))
    if usable < MIN_USABLE_MINUTES:
        raise FitError(f"only {usable} usable minutes, need at least {MIN_USABLE_MINUTES}")
    t = emp.minutes
    fits = {
        "r": fit_piecewise(t, emp.r_hat, emp.alive, config.r_segments, plateau=True,
                           bounds=(0.0, 1.0)),
        "q_end": fit_piecewise(t, emp.q_hat, emp.fights, config.q_segments, monotone=True,
                               bounds=(0.0, 1.0)),
        "delta_F": fit_piecewise(t, emp.dF_hat, emp.n_farm, config.income_segments,
                                 bounds=(0.0, np.inf)),
        "delta_W": fit_piecewise(t, emp.dW_hat, emp.n_fight, config.income_segments,
                                 bounds=(0.0, np.inf)),
        "delta_L": fit_piecewise(t, emp.dL_hat, emp.n_fight, config.income_segments,
                                 bounds=(0.0, np.inf)),
    }
    return {k: f.curve for k, f in fits.items()}, {k: f.rms for k, f in fits.items()}


def calibrate(matches, reward: RewardConfig | None = None, strip: bool = True,
              config: FitConfig = FitConfig()) -> FittedParams:
    """Label, strip and fit a corpus of matches."""
    matches = sorted(matches, key=lambda m: m.match_id)
    if not matches:
        raise FitError("no matches to calibrate from")
    reward = reward or RewardConfig()
    labels = [label_rounds(m, match_teamfights(m)) for m in matches]
    stripped = [strip_gc_rewards(m, reward, enabled=strip) for m in matches]
    emp = empirical_estimates(stripped, labels)
    curves, rms = fit_curves(emp, config)
    # the fight model sees the wealth actually held, rewards included
    wa, wb, won = teamfight_samples(matches, labels)
    theta = fit_theta(wa, wb, won)
    w0 = float(np.mean([0.5 * (m.wealth_A[0] + m.wealth_B[0]) for m in matches]))
    counts = {"alive": emp.alive, "fights": emp.fights, "farm": emp.n_farm,
              "fight_income": emp.n_fight}
    return FittedParams(curves, theta, emp, rms, w0, reward.game, reward.reward, len(matches),
                        int(won.size), counts)


def curve_error(fitted: PiecewiseLinear, truth: PiecewiseLinear, minutes, weights) -> float:
    """Weighted RMS difference as a fraction of the true curve's range.

    A flat truth is measured against its own magnitude instead.
    """
    minutes = np.asarray(minutes, dtype=float)
    w = np.asarray(weights, dtype=float)
    f, g = fitted(minutes), truth(minutes)
    rmse = math.sqrt(float(np.sum(w * (f - g) ** 2)) / float(np.sum(w)))
    scale = float(np.max(g) - np.min(g)) or float(np.max(np.abs(g)))
    return rmse / scale
