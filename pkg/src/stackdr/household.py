"""Continuous household best response (water-filling).

maximise  sum_t omega_t l_t - theta/2 l_t^2 - P_t l_t
s.t.      lo_t <= l_t <= hi_t,   sum_t l_t = daily_total

The solution is l_t = clamp((omega_t - P_t - mu) / theta, lo_t, hi_t) with the
multiplier mu chosen so the loads add up to the daily total.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Infeasible

EQUALITY_RTOL = 1e-7
KKT_ATOL = 1e-9


def satisfaction(omega, theta, x):
    return omega * x - 0.5 * theta * x * x


@dataclass(frozen=True, eq=False)
class HouseholdProblem:
    omega: np.ndarray
    theta: float
    lo: np.ndarray
    hi: np.ndarray
    daily_total: float
    price: np.ndarray


@dataclass(frozen=True, eq=False)
class HouseholdSolution:
    load: np.ndarray
    mu: float
    objective: float


def household_objective(p: HouseholdProblem, load: np.ndarray) -> float:
    return float(np.sum(satisfaction(p.omega, p.theta, load) - p.price * load))


def _loads(p: HouseholdProblem, mu) -> np.ndarray:
    return np.clip((p.omega - p.price - mu) / p.theta, p.lo, p.hi)


def best_response(p: HouseholdProblem) -> HouseholdSolution:
    lo_sum, hi_sum, total = float(p.lo.sum()), float(p.hi.sum()), p.daily_total
    slack = EQUALITY_RTOL * max(1.0, abs(total))
    if total < lo_sum - slack or total > hi_sum + slack:
        raise Infeasible(f"daily total {total:.6g} outside [{lo_sum:.6g}, {hi_sum:.6g}]")

    r = p.omega - p.price
    # mu values where a slot leaves its upper / lower bound; sum of loads is
    # non-increasing and piecewise linear in mu between consecutive breakpoints
    breaks = np.unique(np.concatenate([r - p.theta * p.hi, r - p.theta * p.lo]))
    sums = np.clip((r[None, :] - breaks[:, None]) / p.theta, p.lo, p.hi).sum(axis=1)
    # sums is non-increasing; locate the segment bracketing the target
    k = int(np.searchsorted(-sums, -total, side="left"))
    if k == 0:
        mu = float(breaks[0])
    elif k >= breaks.size:
        mu = float(breaks[-1])
    else:
        s0, s1 = sums[k - 1], sums[k]
        m0, m1 = breaks[k - 1], breaks[k]
        mu = float(m0) if s0 == s1 else float(m0 + (s0 - total) * (m1 - m0) / (s0 - s1))

    load = _loads(p, mu)
    # polish: solve mu exactly on the free set implied by the bracket
    free = (load > p.lo) & (load < p.hi)
    if free.any():
        fixed = float(load[~free].sum())
        mu = float((r[free].sum() - p.theta * (total - fixed)) / free.sum())
        polished = _loads(p, mu)
        if np.array_equal((polished > p.lo) & (polished < p.hi), free):
            load = polished
    return HouseholdSolution(load=load, mu=mu, objective=household_objective(p, load))


def kkt_residual(p: HouseholdProblem, sol: HouseholdSolution) -> float:
    """Largest violation of stationarity, complementary slackness and the energy total."""
    grad = p.omega - p.theta * sol.load - p.price - sol.mu
    at_lo = np.isclose(sol.load, p.lo, rtol=0, atol=1e-12)
    at_hi = np.isclose(sol.load, p.hi, rtol=0, atol=1e-12)
    res = np.where(at_lo & at_hi, 0.0, np.where(at_lo, np.maximum(grad, 0.0),
                   np.where(at_hi, np.maximum(-grad, 0.0), np.abs(grad))))
    primal = abs(float(sol.load.sum()) - p.daily_total)
    return max(float(res.max(initial=0.0)), primal)
