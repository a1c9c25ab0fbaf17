"""Closed-form analysis of the Quidditch random-walk model.

The game state is the score difference ``delta`` (Gryffindor minus Slytherin).
Each round, with probability ``q`` the Snitch is caught (worth ``x`` points)
and the game ends; otherwise Gryffindor scores with probability ``p`` and
Slytherin with probability ``1 - p``.  Ties after a catch go to the catcher.

Everything here is a pure function of ``(p, q, x)``.  Functions accept scalar
or array ``x``/``delta`` where noted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Below this the spectral constants lose too many digits to cancellation.
Q_FLOOR = 1e-6


class SpectralError(ValueError):
    """Raised when the spectral constants are outside (0, 1)."""


@dataclass(frozen=True)
class QuidditchParams:
    p: float
    q: float
    swapped: bool = False

    def __post_init__(self):
        if not (0.0 < self.p < 1.0):
            raise ValueError(f"p must lie in (0, 1), got {self.p!r}")
        if not (0.0 < self.q < 1.0):
            raise ValueError(f"q must lie in (0, 1), got {self.q!r}")

    @classmethod
    def canonical(cls, p: float, q: float) -> "QuidditchParams":
        """Build params with ``p <= 1/2``, swapping the teams if needed.

        The surprise is invariant under the swap; beliefs map as
        ``b(p, delta) = 1 - b(1 - p, -delta)``.
        """
        if p > 0.5:
            return cls(1.0 - p, q, swapped=True)
        return cls(p, q)

    def mirrored(self) -> "QuidditchParams":
        return QuidditchParams(1.0 - self.p, self.q, swapped=not self.swapped)


@dataclass(frozen=True)
class SpectralConstants:
    kappa: float
    beta: float
    beta_hat: float
    alpha: float
    alpha_hat: float


@dataclass(frozen=True)
class SurpriseExpansion:
    """Coefficients of
    ``Surp(x) = c0 + c1 B + c2 x B + c3 B^2 H + c1_hat H + c2_hat x H + c3_hat B H^2``
    with ``B = beta**x`` and ``H = beta_hat**x``.
    """

    c0: float
    c1: float
    c2: float
    c3: float
    c1_hat: float
    c2_hat: float
    c3_hat: float
    beta: float
    beta_hat: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        B = np.power(self.beta, x)
        H = np.power(self.beta_hat, x)
        out = (self.c0 + self.c1 * B + self.c2 * x * B + self.c3 * B * B * H
               + self.c1_hat * H + self.c2_hat * x * H + self.c3_hat * B * H * H)
        return out if out.ndim else float(out)

    def varying(self, x):
        """``Surp(x) - c0``.  Every term is small where Surp is flat, so this
        keeps full relative precision and ranks scores that ``Surp`` itself
        cannot tell apart in double precision."""
        x = np.asarray(x, dtype=float)
        B = np.power(self.beta, x)
        H = np.power(self.beta_hat, x)
        out = (self.c1 * B + self.c2 * x * B + self.c3 * B * B * H
               + self.c1_hat * H + self.c2_hat * x * H + self.c3_hat * B * H * H)
        return out if out.ndim else float(out)

    def derivative(self, x):
        """Exact d/dx of the expansion."""
        x = np.asarray(x, dtype=float)
        lb, lh = math.log(self.beta), math.log(self.beta_hat)
        B = np.power(self.beta, x)
        H = np.power(self.beta_hat, x)
        out = ((self.c1 * lb + self.c2 + self.c2 * lb * x) * B
               + self.c3 * (2 * lb + lh) * B * B * H
               + (self.c1_hat * lh + self.c2_hat + self.c2_hat * lh * x) * H
               + self.c3_hat * (lb + 2 * lh) * B * H * H)
        return out if out.ndim else float(out)

    def scaled_derivative(self, x):
        """d/dx Surp divided by ``max(beta, beta_hat)**x``.

        Same sign as :meth:`derivative` but free of underflow for large ``x``.
        """
        x = np.asarray(x, dtype=float)
        lb, lh = math.log(self.beta), math.log(self.beta_hat)
        top = max(lb, lh)
        # B and H relative to the larger power; BH is the unscaled product
        B = np.exp((lb - top) * x)
        H = np.exp((lh - top) * x)
        BH = np.power(self.beta * self.beta_hat, x)
        out = ((self.c1 * lb + self.c2 + self.c2 * lb * x) * B
               + self.c3 * (2 * lb + lh) * B * BH
               + (self.c1_hat * lh + self.c2_hat + self.c2_hat * lh * x) * H
               + self.c3_hat * (lb + 2 * lh) * H * BH)
        return out if out.ndim else float(out)


def spectral_constants(params: QuidditchParams) -> SpectralConstants:
    """kappa and the roots of the belief/visit recurrences.

    ``beta`` and ``beta_hat`` are the roots inside the unit interval; the
    large roots satisfy ``alpha = 1/beta_hat`` and ``alpha_hat = 1/beta``.
    """
    p, q = params.p, params.q
    kappa = math.sqrt(1.0 - 4.0 * p * (1.0 - p) * (1.0 - q) ** 2)
    beta = (1.0 - kappa) / (2.0 * p * (1.0 - q))
    beta_hat = (1.0 - kappa) / (2.0 * (1.0 - p) * (1.0 - q))
    alpha = (1.0 + kappa) / (2.0 * p * (1.0 - q))
    alpha_hat = (1.0 + kappa) / (2.0 * (1.0 - p) * (1.0 - q))
    return SpectralConstants(kappa, beta, beta_hat, alpha, alpha_hat)


def _checked(params, consts):
    c = spectral_constants(params) if consts is None else consts
    if not (0.0 < c.beta < 1.0 and 0.0 < c.beta_hat < 1.0):
        raise SpectralError(
            f"spectral constants out of range: beta={c.beta!r}, beta_hat={c.beta_hat!r}")
    return c


def belief(params: QuidditchParams, x: int, delta):
    """Probability Gryffindor wins given score difference ``delta``.

    ``delta`` may be an integer or an integer array.
    """
    p = params.p
    c = _checked(params, None)
    b, bh = c.beta, c.beta_hat
    den = 1.0 - b * bh
    d = np.asarray(delta, dtype=float)
    out = np.empty_like(d)

    hi = d >= x
    lo = d <= -x
    mid = ~(hi | lo)
    if hi.any():
        out[hi] = 1.0 - b ** (d[hi] - x) * (1 - bh) * (1 - p + b ** (2 * x + 1) * p) / den
    if mid.any():
        dm = d[mid]
        out[mid] = p + (bh ** (x - dm + 1) * (1 - b) * (1 - p)
                        - b ** (x + dm + 1) * (1 - bh) * p) / den
    # x == 0 puts delta == 0 in both tails; the upper branch already holds it
    lo &= ~hi
    if lo.any():
        out[lo] = bh ** (-d[lo] - x) * (1 - b) * (p + (1 - p) * bh ** (2 * x + 1)) / den
    return out if out.ndim else float(out)


def belief_branch(params: QuidditchParams, x: int, delta: int, branch: str) -> float:
    """Evaluate one named branch (``"upper"``, ``"middle"``, ``"lower"``) of the
    belief formula regardless of where ``delta`` lies.  Used to check that the
    branches agree at ``delta = +-x``.
    """
    p = params.p
    c = _checked(params, None)
    b, bh = c.beta, c.beta_hat
    den = 1.0 - b * bh
    if branch == "upper":
        return 1.0 - b ** (delta - x) * (1 - bh) * (1 - p + b ** (2 * x + 1) * p) / den
    if branch == "middle":
        return p + (bh ** (x - delta + 1) * (1 - b) * (1 - p)
                    - b ** (x + delta + 1) * (1 - bh) * p) / den
    if branch == "lower":
        return bh ** (-delta - x) * (1 - b) * (p + (1 - p) * bh ** (2 * x + 1)) / den
    raise ValueError(f"unknown branch {branch!r}")


def visits(params: QuidditchParams, delta):
    """Expected number of rounds spent at score difference ``delta``,
    starting from 0.  Independent of the Snitch score."""
    c = _checked(params, None)
    d = np.asarray(delta, dtype=float)
    out = np.where(d >= 0, c.beta_hat ** np.abs(d), c.beta ** np.abs(d)) / c.kappa
    return out if out.ndim else float(out)


def round_surprise(params: QuidditchParams, x: int, delta):
    """Expected surprise of one round played from ``delta``.

    Returns ``(final, non_final)``: the part from the Snitch being caught and
    the part from a goal being scored.
    """
    p, q = params.p, params.q
    d = np.asarray(delta, dtype=np.int64)
    b0 = np.asarray(belief(params, x, d))
    up = np.asarray(belief(params, x, d + 1))
    down = np.asarray(belief(params, x, d - 1))
    non_final = (1 - q) * (p * np.abs(up - b0) + (1 - p) * np.abs(b0 - down))
    # the catcher wins when |delta| <= x, so delta == x belongs to the middle case
    final = q * np.where(d > x, 1 - b0,
                         np.where(d < -x, b0, p * (1 - b0) + (1 - p) * b0))
    if final.ndim == 0:
        return float(final), float(non_final)
    return final, non_final


def surprise_closed_form(params: QuidditchParams, x, consts: SpectralConstants | None = None):
    """Expected overall surprise ``Surp(x)`` for real ``x >= 0`` (scalar or array).

    ``consts`` overrides the spectral constants; it exists so the verification
    harness can inject a corrupted state.
    """
    p, q = params.p, params.q
    c = _checked(params, consts)
    k, b, bh = c.kappa, c.beta, c.beta_hat
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    D = 1.0 - b * bh
    B = np.power(b, x)
    H = np.power(bh, x)
    BH1 = (b * bh) * B * H  # (beta*beta_hat)**(x+1)

    goals = ((1 - q) * (1 - b) * (1 - bh) / (k * D)) * (
        (p + (1 - p) * bh) * (((1 - p) * H + p * b * B) / D + (1 - p) * x * H)
        + (p * b + (1 - p)) * ((p * B + (1 - p) * bh * H) / D + p * x * B))
    catch = (q / (k * D)) * (
        b * (1 - bh) * (1 - p + b * B * B * p) * bh * H / D
        + 2 * (1 - p) * p * (1 - bh * H) * D / (1 - bh)
        + (1 - 2 * p) * ((1 - b) * (1 - p) * x * bh * H - (1 - bh) * p * b * B * (1 - BH1) / D)
        + (1 - 2 * p) * (-(1 - bh) * p * x * b * B + (1 - b) * (1 - p) * bh * H * (1 - BH1) / D)
        + 2 * (1 - p) * p * (b - b * B) * D / (1 - b)
        + bh * (1 - b) * (p + (1 - p) * bh * H * H) * b * B / D)
    out = goals + catch
    return out if out.ndim else float(out)


def surprise_limit(params: QuidditchParams) -> float:
    """``lim_{x -> inf} Surp(x)``: only the final catch moves the belief."""
    return 2.0 * params.p * (1.0 - params.p)


def expansion_coefficients(params: QuidditchParams) -> SurpriseExpansion:
    """Collect ``Surp(x)`` by the powers ``beta**x``, ``beta_hat**x`` and ``x``."""
    p, q = params.p, params.q
    c = _checked(params, None)
    k, b, bh = c.kappa, c.beta, c.beta_hat
    D = 1.0 - b * bh
    A = (1 - q) * (1 - b) * (1 - bh) / (k * D)
    Q = q / (k * D)

    c0 = 2 * p * q * (1 - p) * D / (k * (1 - b) * (1 - bh))
    c1 = (A * p * ((p + (1 - p) * bh) * b + p * b + 1 - p) / D
          + Q * (-(1 - 2 * p) * (1 - bh) * p * b / D
                 - 2 * p * (1 - p) * b * D / (1 - b)
                 + p * b * bh * (1 - b) / D))
    c1_hat = (A * (1 - p) * ((p + (1 - p) * bh) + (p * b + 1 - p) * bh) / D
              + Q * ((1 - p) * b * bh * (1 - bh) / D
                     - 2 * p * (1 - p) * bh * D / (1 - bh)
                     + (1 - 2 * p) * (1 - b) * (1 - p) * bh / D))
    c2 = A * (p * b + 1 - p) * p - Q * (1 - 2 * p) * (1 - bh) * p * b
    c2_hat = A * (p + (1 - p) * bh) * (1 - p) + Q * (1 - 2 * p) * (1 - b) * (1 - p) * bh
    c3 = 2 * q * p * (1 - p) * b * b * bh * (1 - bh) / (k * D * D)
    c3_hat = 2 * q * p * (1 - p) * b * bh * bh * (1 - b) / (k * D * D)
    return SurpriseExpansion(c0, c1, c2, c3, c1_hat, c2_hat, c3_hat, b, bh)


@dataclass(frozen=True)
class RootBounds:
    theta1: float
    theta2: float
    upper_bound: float


def root_bounds(params: QuidditchParams) -> RootBounds:
    """Roots of the two linear factors bounding d/dx Surp, and the bound
    ``U = max(1, theta1)`` past which Surp is strictly decreasing.

    Params with ``p > 1/2`` are mirrored first.
    """
    if params.p > 0.5:
        params = params.mirrored()
    e = expansion_coefficients(params)
    theta1 = -e.c1 / e.c2 - 1.0 / math.log(e.beta)
    theta2 = -e.c1_hat / e.c2_hat - 1.0 / math.log(e.beta_hat)
    return RootBounds(theta1, theta2, max(1.0, theta1))


def taylor_theta1(params: QuidditchParams) -> float:
    """Small-q approximation ``(1/2q)((1-p)/p - 1)`` of theta1.

    Only meaningful for an unbalanced match-up; ``p == 1/2`` is rejected.
    """
    p, q = params.p, params.q
    if p > 0.5:
        p = 1.0 - p
    if p == 0.5:
        raise ValueError("taylor_theta1 is undefined for a balanced match-up (p = 1/2)")
    return (1.0 / (2.0 * q)) * ((1.0 - p) / p - 1.0)


def _argmax(params: QuidditchParams, x_max: int) -> int:
    # rank by Surp - c0: near the optimum Surp is flat to below 1e-16 for
    # lopsided match-ups and would pick a score by rounding noise
    e = expansion_coefficients(QuidditchParams.canonical(params.p, params.q))
    # np.argmax returns the first maximum, i.e. ties go to the smaller x
    return int(np.argmax(e.varying(np.arange(x_max + 1))))


def x_tilde(params: QuidditchParams) -> int:
    """Best integer score among ``0 .. ceil(U)``."""
    params = QuidditchParams.canonical(params.p, params.q)
    return _argmax(params, math.ceil(root_bounds(params).upper_bound))


def default_x_max(params: QuidditchParams) -> int:
    return 4 * math.ceil(root_bounds(params).upper_bound) + 10


def optimal_x_bruteforce(params: QuidditchParams, x_max: int | None = None) -> int:
    """Exact argmax of Surp over ``0 .. x_max`` (ties to the smaller score)."""
    if x_max is None:
        x_max = default_x_max(params)
    if x_max < 0:
        raise ValueError("x_max must be nonnegative")
    return _argmax(params, x_max)


def surp01_gap(q):
    """Lower bound on ``Surp(0) - Surp(1)`` at ``p = 1/2`` as a function of q."""
    q = np.asarray(q, dtype=float)
    s = np.sqrt(q * (2 - q))
    return -q * (q * q - 2 * q - 1 + 2 * s) / (2 * s * (q - 2 + s) ** 2)
