"""Compiled per-state tree recursion for the MOBA solver.

Round parameters arrive as arrays indexed by round number (``R[rnd]`` is the
teamfight probability of round ``rnd``).  Grid keys pack
``(wealth_A index, wealth_B index, clock)`` into one int64.

Win probabilities are carried as the centred value ``d = winp - 1/2``.  When
the teams are equally rated (``sym``), swapping them maps ``d`` to ``-d``
exactly, so only states with ``wealth_A index >= wealth_B index`` are stored
and the other half is read through the mirror.  Sums over the two teamfight
branches are written so that mirrored inputs give bit-identical results,
which makes a balanced game evaluate to exactly one half.
"""

import math

import numpy as np
from numba import njit

KEY_SPAN = 1 << 24
# ring radius searched when a rounded leaf is not a stored state
FALLBACK_RADIUS = 3


@njit(cache=True)
def half_edge(wa, wb, lam, theta):
    """p_theta(wa, wb) - 1/2, antisymmetric in the two teams when lam == 1."""
    a = lam * wa
    if a >= wb:
        return 0.5 * math.tanh(0.5 * theta * (a - wb) / wb)
    return -0.5 * math.tanh(0.5 * theta * (wb - a) / a)


@njit(cache=True)
def grid_index(w, step):
    return np.int64(math.ceil(w / step - 0.5))


@njit(cache=True)
def pack(ka, kb, c, nclock):
    return (ka * KEY_SPAN + kb) * nclock + c


@njit(cache=True)
def encode(wa, wb, c, step, nclock, sym):
    ka = grid_index(wa, step)
    kb = grid_index(wb, step)
    if sym and ka < kb:
        return pack(kb, ka, c, nclock)
    return pack(ka, kb, c, nclock)


@njit(cache=True)
def _find(keys, key):
    i = np.searchsorted(keys, key)
    if i < keys.size and keys[i] == key:
        return i
    return -1


@njit(cache=True)
def _lookup(ka, kb, c, keys, nclock, sym):
    # index into the stored arrays (or -1) and the sign to apply to d
    if sym and ka < kb:
        return _find(keys, pack(kb, ka, c, nclock)), -1.0
    return _find(keys, pack(ka, kb, c, nclock)), 1.0


@njit(cache=True)
def _leaf(wa, wb, c, reach, lam, theta, keys, vd, vs, step, nclock, sym, stats):
    ka = grid_index(wa, step)
    kb = grid_index(wb, step)
    i, sign = _lookup(ka, kb, c, keys, nclock, sym)
    if i >= 0:
        return sign * vd[i], vs[i]
    sign = 1.0
    if sym and ka < kb:
        # search around the canonical image so mirrored leaves agree
        ka, kb = kb, ka
        wa, wb = wb, wa
        sign = -1.0
    for rad in range(1, FALLBACK_RADIUS + 1):
        for da in range(-rad, rad + 1):
            for db in range(-rad, rad + 1):
                if max(abs(da), abs(db)) != rad:
                    continue
                if ka + da <= 0 or kb + db <= 0:
                    continue
                j, s2 = _lookup(ka + da, kb + db, c, keys, nclock, sym)
                if j >= 0:
                    stats[0] += reach
                    if sym and ka == kb:
                        # balanced by symmetry
                        return 0.0, vs[j]
                    return sign * s2 * vd[j], vs[j]
    # nothing nearby: treat the state as one decisive fight
    stats[1] += reach
    h = half_edge(wa, wb, lam, theta)
    if sym and ka == kb:
        h = 0.0
    return sign * h, 2.0 * (0.5 + h) * (0.5 - h)


@njit(cache=True)
def node_value(wa, wb, c, rnd, left, reach, R, QE, F, W, LO, lam, theta, gc, delay,
               keys, vd, vs, step, nclock, sym, stats):
    """(d, sur) of the exact state entering round ``rnd`` with ``left``
    rounds to expand before reading the grid."""
    if left == 0:
        return _leaf(wa, wb, c, reach, lam, theta, keys, vd, vs, step, nclock, sym, stats)
    r = R[rnd]
    qe = QE[rnd]
    h = half_edge(wa, wb, lam, theta)
    avail = c == 0
    bonus = gc if avail else 0.0
    tick = c - 1 if c > 0 else 0
    cf = delay if avail else tick
    p0 = 1.0 - r
    p1 = r * (0.5 + h) * (1.0 - qe)
    p2 = r * (0.5 - h) * (1.0 - qe)
    ae = r * (0.5 + h) * qe
    be = r * (0.5 - h) * qe
    d0 = s0 = d1 = s1 = d2 = s2 = 0.0
    if p0 > 0.0:
        d0, s0 = node_value(wa + F[rnd], wb + F[rnd], tick, rnd + 1, left - 1, reach * p0,
                            R, QE, F, W, LO, lam, theta, gc, delay, keys, vd, vs, step, nclock,
                            sym, stats)
    if p1 > 0.0:
        d1, s1 = node_value(wa + W[rnd] + bonus, wb + LO[rnd], cf, rnd + 1, left - 1, reach * p1,
                            R, QE, F, W, LO, lam, theta, gc, delay, keys, vd, vs, step, nclock,
                            sym, stats)
    if p2 > 0.0:
        d2, s2 = node_value(wa + LO[rnd], wb + W[rnd] + bonus, cf, rnd + 1, left - 1, reach * p2,
                            R, QE, F, W, LO, lam, theta, gc, delay, keys, vd, vs, step, nclock,
                            sym, stats)
    # pairwise sums of the mirrored terms keep the team swap exact
    d = p0 * d0 + (p1 * d1 + p2 * d2) + 0.5 * (ae - be)
    sur = (p0 * (abs(d - d0) + s0)
           + (p1 * (abs(d - d1) + s1) + p2 * (abs(d - d2) + s2))
           + (ae * abs(d - 0.5) + be * abs(d + 0.5)))
    return d, sur


@njit(cache=True)
def values(wa, wb, c, rnd, depth, reach, R, QE, F, W, LO, lam, theta, gc, delay,
           keys, vd, vs, step, nclock, sym):
    n = wa.size
    d = np.empty(n)
    sur = np.empty(n)
    stats = np.zeros(2)
    for i in range(n):
        d[i], sur[i] = node_value(wa[i], wb[i], c[i], rnd, depth, reach[i], R, QE, F, W, LO,
                                  lam, theta, gc, delay, keys, vd, vs, step, nclock, sym, stats)
    return d, sur, stats


@njit(cache=True)
def _emit(wa, wb, c, rnd, left, mass, R, QE, F, W, LO, lam, theta, gc, delay,
          step, nclock, sym, out_keys, out_mass, counter):
    if left == 0:
        k = counter[0]
        out_keys[k] = encode(wa, wb, c, step, nclock, sym)
        out_mass[k] = mass
        counter[0] = k + 1
        return
    r = R[rnd]
    qe = QE[rnd]
    h = half_edge(wa, wb, lam, theta)
    avail = c == 0
    bonus = gc if avail else 0.0
    tick = c - 1 if c > 0 else 0
    cf = delay if avail else tick
    p0 = 1.0 - r
    p1 = r * (0.5 + h) * (1.0 - qe)
    p2 = r * (0.5 - h) * (1.0 - qe)
    if p0 > 0.0:
        _emit(wa + F[rnd], wb + F[rnd], tick, rnd + 1, left - 1, mass * p0, R, QE, F, W, LO,
              lam, theta, gc, delay, step, nclock, sym, out_keys, out_mass, counter)
    if p1 > 0.0:
        _emit(wa + W[rnd] + bonus, wb + LO[rnd], cf, rnd + 1, left - 1, mass * p1, R, QE, F, W,
              LO, lam, theta, gc, delay, step, nclock, sym, out_keys, out_mass, counter)
    if p2 > 0.0:
        _emit(wa + LO[rnd], wb + W[rnd] + bonus, cf, rnd + 1, left - 1, mass * p2, R, QE, F, W,
              LO, lam, theta, gc, delay, step, nclock, sym, out_keys, out_mass, counter)


@njit(cache=True)
def leaves(wa, wb, c, rnd, depth, mass, R, QE, F, W, LO, lam, theta, gc, delay, step, nclock,
           sym):
    """Rounded leaf keys and their probability mass, ``depth`` rounds ahead."""
    cap = wa.size * 3 ** depth
    out_keys = np.empty(cap, dtype=np.int64)
    out_mass = np.empty(cap)
    counter = np.zeros(1, dtype=np.int64)
    for i in range(wa.size):
        _emit(wa[i], wb[i], c[i], rnd, depth, mass[i], R, QE, F, W, LO, lam, theta, gc, delay,
              step, nclock, sym, out_keys, out_mass, counter)
    return out_keys[:counter[0]], out_mass[:counter[0]]
