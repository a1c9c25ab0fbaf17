import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gamechanger.oracle import dp_solve
from gamechanger.quidditch import (QuidditchParams, SpectralError, belief, belief_branch,
                                   default_x_max, expansion_coefficients, optimal_x_bruteforce,
                                   root_bounds, round_surprise, spectral_constants,
                                   surp01_gap, surprise_closed_form, surprise_limit,
                                   taylor_theta1, visits, x_tilde)

P = QuidditchParams

ps = st.floats(0.01, 0.99)
qs = st.floats(0.02, 0.95)


def test_params_reject_boundaries():
    for p, q in [(0.0, 0.5), (1.0, 0.5), (0.5, 0.0), (0.5, 1.0), (-0.1, 0.5)]:
        with pytest.raises(ValueError):
            P(p, q)


def test_canonical_swaps_to_p_below_half():
    c = P.canonical(0.7, 0.2)
    assert c.p == pytest.approx(0.3) and c.swapped
    assert not P.canonical(0.3, 0.2).swapped


def test_spectral_constants_pinned():
    # roots in (0, 1) of p(1-q)z^2 - z + (1-p)(1-q) and its mirror, 40-digit mpmath
    c = spectral_constants(P(0.3, 0.1))
    assert c.kappa == pytest.approx(0.56533176100410279355, rel=1e-14)
    assert c.beta == pytest.approx(0.80494118332573556751, rel=1e-14)
    assert c.beta_hat == pytest.approx(0.34497479285388667179, rel=1e-14)
    assert c.alpha == pytest.approx(1 / c.beta_hat, rel=1e-14)
    assert c.alpha_hat == pytest.approx(1 / c.beta, rel=1e-14)


def test_kappa_small_q_tends_to_zero():
    # at p = 1/2, kappa = sqrt(q(2 - q))
    ks = [spectral_constants(P(0.5, q)).kappa for q in (1e-2, 1e-4, 1e-6)]
    assert ks[0] > ks[1] > ks[2]
    assert ks[2] == pytest.approx(math.sqrt(2e-6), rel=1e-6)


@settings(max_examples=200, deadline=None)
@given(ps, qs)
def test_spectral_ranges(p, q):
    c = spectral_constants(P(p, q))
    assert 0 < c.kappa <= 1
    assert 0 < c.beta < 1 and 0 < c.beta_hat < 1


def test_corrupted_constants_rejected():
    params = P(0.3, 0.1)
    c = spectral_constants(params)
    bad = type(c)(c.kappa, -c.beta, c.beta_hat, c.alpha, c.alpha_hat)
    with pytest.raises(SpectralError):
        surprise_closed_form(params, 2, bad)


def test_belief_symmetric_half():
    for q in (0.05, 0.3, 0.9):
        for x in (0, 1, 5):
            assert belief(P(0.5, q), x, 0) == pytest.approx(0.5, abs=1e-15)


def test_belief_mirror_sums_to_one():
    d = np.arange(-12, 13)
    b = belief(P(0.5, 0.2), 3, d)
    np.testing.assert_allclose(b + b[::-1], 1.0, atol=1e-14)


@settings(max_examples=100, deadline=None)
@given(ps, qs, st.integers(0, 30))
def test_belief_branches_agree_at_thresholds(p, q, x):
    params = P(p, q)
    for delta, pair in ((x, ("upper", "middle")), (-x, ("middle", "lower"))):
        a, b = (belief_branch(params, x, delta, br) for br in pair)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-300)


def test_belief_matches_dp():
    params = P(0.3, 0.1)
    sol = dp_solve(params, 2)
    d = np.arange(-10, 11)
    np.testing.assert_allclose(belief(params, 2, d), sol.belief_at(d), atol=1e-9)


def test_belief_is_martingale():
    params = P(0.35, 0.15)
    x = 4
    d = np.arange(-30, 31)
    p, q = params.p, params.q
    b = belief(params, x, d)
    catch = np.where(d > x, 1.0, np.where(d < -x, 0.0, p))
    nxt = q * catch + (1 - q) * (p * belief(params, x, d + 1) + (1 - p) * belief(params, x, d - 1))
    assert np.max(np.abs(nxt - b)) < 1e-10


def test_visits():
    params = P(0.3, 0.1)
    c = spectral_constants(params)
    assert visits(params, 0) == pytest.approx(1 / c.kappa)
    d = np.arange(-2000, 2001)
    assert visits(params, d).sum() == pytest.approx(1 / params.q, abs=1e-9)
    sol = dp_solve(params, 0)
    for delta in (-3, 3):
        assert visits(params, delta) == pytest.approx(sol.visits_at(delta), abs=1e-9)


def test_round_surprise_symmetric_catch():
    q = 0.2
    final, non_final = round_surprise(P(0.5, q), 0, 0)
    assert final == pytest.approx(q / 2)
    assert 0 <= non_final <= 1


def test_round_surprise_matches_dp_step():
    params = P(0.3, 0.1)
    x, delta = 2, 1
    sol = dp_solve(params, x)
    p, q = params.p, params.q
    b0 = sol.belief_at(delta)
    expect = (q * (p * (1 - b0) + (1 - p) * b0)
              + (1 - q) * (p * abs(sol.belief_at(delta + 1) - b0)
                           + (1 - p) * abs(b0 - sol.belief_at(delta - 1))))
    assert sum(round_surprise(params, x, delta)) == pytest.approx(expect, abs=1e-9)


def test_round_surprise_flat_beliefs():
    # far beyond the threshold the belief is 1 to machine precision
    _, nf = round_surprise(P(0.3, 0.5), 1, 200)
    assert nf == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("p,q,x", [(0.3, 0.1, 0), (0.3, 0.1, 3), (0.2, 0.05, 10), (0.45, 0.3, 1),
                                   (0.7, 0.2, 4)])
def test_closed_form_equals_term_sum(p, q, x):
    params = P(p, q)
    d = np.arange(-3000, 3001)
    final, nf = round_surprise(params, x, d)
    total = math.fsum((final + nf) * visits(params, d))
    assert surprise_closed_form(params, x) == pytest.approx(total, abs=1e-10)


def test_limit():
    for p, q in [(0.3, 0.1), (0.1, 0.5), (0.5, 0.05)]:
        params = P(p, q)
        assert abs(surprise_closed_form(params, 1e4) - surprise_limit(params)) < 1e-4


def test_surprise_lower_bound():
    rng = np.random.default_rng(1)
    for _ in range(200):
        params = P(rng.uniform(0.01, 0.99), rng.uniform(0.02, 0.95))
        xs = np.arange(0, 40)
        b0 = np.array([belief(params, int(x), 0) for x in xs])
        assert np.all(surprise_closed_form(params, xs) >= 2 * b0 * (1 - b0) - 1e-12)


def test_symmetric_zero_beats_one():
    params = P(0.5, 0.3)
    s = surprise_closed_form(params, np.array([0, 1]))
    assert s[0] > s[1]
    assert s[0] - s[1] >= surp01_gap(0.3) - 1e-12


def test_expansion_reassembles():
    for p, q in [(0.3, 0.1), (0.05, 0.6), (0.5, 0.2), (0.8, 0.01)]:
        params = P(p, q)
        e = expansion_coefficients(params)
        x = np.arange(0, 51)
        np.testing.assert_allclose(e(x), surprise_closed_form(params, x), rtol=1e-10)
        np.testing.assert_allclose(e.varying(x) + e.c0, e(x), rtol=1e-14)


def test_expansion_half_duality():
    e = expansion_coefficients(P(0.5, 0.2))
    assert e.beta == pytest.approx(e.beta_hat, rel=1e-14)
    for a, b in [(e.c1, e.c1_hat), (e.c2, e.c2_hat), (e.c3, e.c3_hat)]:
        assert a == pytest.approx(b, rel=1e-12)


def test_expansion_duality_pair():
    a = expansion_coefficients(P(0.3, 0.1))
    b = expansion_coefficients(P(0.7, 0.1))
    assert a.c2 == pytest.approx(b.c2_hat, rel=1e-10)


def test_derivative_matches_finite_difference():
    e = expansion_coefficients(P(0.2, 0.1))
    x = np.linspace(0.5, 40, 30)
    h = 1e-5
    fd = (e(x + h) - e(x - h)) / (2 * h)
    np.testing.assert_allclose(e.derivative(x), fd, atol=1e-8)
    scale = np.maximum(e.beta, e.beta_hat) ** x
    np.testing.assert_allclose(e.scaled_derivative(x) * scale, e.derivative(x), rtol=1e-10,
                               atol=1e-300)


def test_scaled_derivative_survives_underflow():
    e = expansion_coefficients(P(0.00035486826393055226, 0.3700606527356476))
    assert e.derivative(4669.1) == 0.0
    assert e.scaled_derivative(4669.1) < 0


def test_root_bounds_half():
    rb = root_bounds(P(0.5, 0.2))
    assert rb.theta1 == pytest.approx(rb.theta2)
    assert rb.upper_bound <= 1.0


def test_root_bounds_mirror_invariant():
    a, b = root_bounds(P(0.3, 0.1)), root_bounds(P(0.7, 0.1))
    assert a.theta1 == pytest.approx(b.theta1) and a.upper_bound == b.upper_bound


def test_taylor_values():
    assert taylor_theta1(P(0.25, 0.05)) == pytest.approx(20.0)
    assert taylor_theta1(P(0.4999, 0.05)) < 0.01
    with pytest.raises(ValueError):
        taylor_theta1(P(0.5, 0.05))
    diffs = [abs(root_bounds(P(0.3, q)).theta1 - taylor_theta1(P(0.3, q)))
             for q in (1e-2, 1e-3, 1e-4, 1e-5)]
    assert max(diffs) < 5


def test_x_tilde_examples():
    for q in (0.01, 0.3, 0.9):
        assert x_tilde(P(0.5, q)) == 0
    params = P(0.2, 0.1)
    xt = x_tilde(params)
    assert xt > 0
    s = surprise_closed_form(params, xt)
    assert s > surprise_closed_form(params, 0) and s > surprise_limit(params)


def test_bruteforce_examples():
    assert optimal_x_bruteforce(P(0.5, 0.3), 20) == 0
    params = P(0.2, 0.1)
    base = optimal_x_bruteforce(params)
    assert optimal_x_bruteforce(params, 3 * default_x_max(params)) == base
    with pytest.raises(ValueError):
        optimal_x_bruteforce(params, -1)


def test_flat_optimum_is_ranked_consistently():
    # Surp varies by less than 1e-16 around the optimum here
    params = P(0.0148514851485, 1 / 11.0898989899)
    xt = x_tilde(params)
    assert optimal_x_bruteforce(params) == xt
    assert abs(xt - root_bounds(params).theta1) < 5


def test_mirrored_surprise_equal():
    x = np.arange(0, 20)
    np.testing.assert_allclose(surprise_closed_form(P(0.3, 0.2), x),
                               surprise_closed_form(P(0.7, 0.2), x), rtol=1e-12)
