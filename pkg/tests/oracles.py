"""Brute-force reference solvers used to check the fast ones.

Everything here is deliberately naive: exhaustive enumeration or dense grids,
written without reusing any solver code from the package.
"""

import itertools
import math

import numpy as np

_SCHEDULES = {}


def all_schedules(w):
    """Every {-1,0,1}^w vector, rows in lexicographic order with 1 > 0 > -1."""
    if w not in _SCHEDULES:
        _SCHEDULES[w] = np.array(list(itertools.product((1, 0, -1), repeat=w)), dtype=np.int64).reshape(-1, w)
    return _SCHEDULES[w]


def household_grid(omega, theta, price, lo_c, hi_c, total_c, step=0.01):
    """Grid-search maximiser of sum(omega l - theta/2 l^2 - price l).

    Bounds and the daily total are given in integer grid units so the equality
    constraint is hit exactly on the grid.
    """
    T = len(omega)
    axes = [np.arange(lo_c[t], hi_c[t] + 1) for t in range(T - 1)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, T - 1)
    last = total_c - mesh.sum(axis=1)
    ok = (last >= lo_c[-1]) & (last <= hi_c[-1])
    pts = np.column_stack([mesh[ok], last[ok]]) * step
    vals = (pts * (np.asarray(omega) - np.asarray(price)) - 0.5 * theta * pts * pts).sum(axis=1)
    k = int(np.argmax(vals))
    return pts[k], float(vals[k])


def bev_enumerate(price, omega, theta, rated_kw, battery_kwh, soc_arrival, window, t_req, t_max, n_slots):
    """Best feasible schedule by enumerating all 3^|window| action vectors.

    Returns (objective, full-day schedule) or (None, None) when nothing is
    feasible. Among optimal schedules the lexicographically largest one
    (charging earliest) wins.
    """
    w = len(window)
    S = all_schedules(w)
    feasible = (S.sum(axis=1) == t_req) & (np.abs(S).sum(axis=1) <= t_max)
    soc = np.full(S.shape[0], float(soc_arrival))
    net = np.zeros(S.shape[0], dtype=np.int64)
    for j in range(w):
        a = S[:, j]
        feasible &= ~((a == 1) & (soc >= battery_kwh - 1e-9))
        feasible &= ~((a == -1) & (soc < rated_kw - 1e-9))
        net = net + a
        soc = np.clip(soc_arrival + net * rated_kw, 0.0, battery_kwh)
    feasible &= soc >= battery_kwh - 1e-9
    if not feasible.any():
        return None, None
    x = S * rated_kw
    om = np.asarray(omega)[list(window)]
    pr = np.asarray(price)[list(window)]
    vals = (om * x - 0.5 * theta * x * x - pr * x).sum(axis=1)
    vals = np.where(feasible, vals, -np.inf)
    best = vals.max()
    k = int(np.flatnonzero(vals >= best - 1e-9 * max(1.0, abs(best)))[0])
    s = np.zeros(n_slots, dtype=np.int64)
    s[list(window)] = S[k]
    return float(vals[k]), s


def plan_grid(demand, upper, step=0.1, top=10.0):
    """Flattest g on the grid {0, step, ..., top}^3 with demand <= g <= upper."""
    levels = np.round(np.arange(0.0, top + step / 2, step), 10)
    G = np.stack(np.meshgrid(levels, levels, levels, indexing="ij"), axis=-1).reshape(-1, 3)
    ok = np.all((G >= np.asarray(demand) - 1e-12) & (G <= np.asarray(upper) + 1e-12), axis=1)
    G = G[ok]
    obj = ((G - G.mean(axis=1, keepdims=True)) ** 2).sum(axis=1)
    k = int(np.argmin(obj))
    return G[k], float(obj[k])


def required_hours(battery_kwh, rated_kw, range_miles, distance):
    return math.ceil(distance * battery_kwh / range_miles / rated_kw - 1e-9)
