"""Retailer side: quadratic generation cost, marginal-cost pricing and the
variance-minimising generation plan.

Prices are plain per-slot numpy arrays (money/kWh).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CurtailmentRequired
from .scenario import GenModel


@dataclass(frozen=True, eq=False)
class GenerationPlan:
    g: np.ndarray
    g_bar: float
    u_rc: float


def cost(gen: GenModel, t: int, g: float) -> float:
    return 0.5 * gen.a[t] * g * g + gen.b[t] * g + gen.c[t]


def marginal_cost(gen: GenModel, t: int, g: float) -> float:
    return gen.a[t] * g + gen.b[t]


def total_cost(gen: GenModel, g: np.ndarray) -> float:
    """Generation cost summed over the day."""
    return float(np.sum(0.5 * gen.a * g * g + gen.b * g + gen.c))


def price(gen: GenModel, g: np.ndarray) -> np.ndarray:
    """Broadcast price lambda_t * (a_t g_t + b_t) for a generation vector."""
    return gen.lam * (gen.a * g + gen.b)


def _check_caps(demand: np.ndarray, upper: np.ndarray) -> None:
    over = np.flatnonzero(demand > upper * (1 + 1e-12))
    if over.size:
        t = int(over[0])
        raise CurtailmentRequired(t, float(demand[t]), float(upper[t]))


def retailer_objective(g: np.ndarray) -> float:
    return float(np.sum((g - g.mean()) ** 2))


def generation_plan(gen: GenModel, demand: np.ndarray, tol: float = 1e-12) -> GenerationPlan:
    """Flattest generation vector g with demand_t <= g_t <= min(g_cap_t, l_cap_t).

    The minimiser is g_t = clamp(c, demand_t, upper_t) where c solves
    c = mean(clamp(c, demand, upper)). The fixed points form an interval; the
    smallest one (least generation) is returned.
    """
    demand = np.asarray(demand, dtype=float)
    upper = gen.upper
    _check_caps(demand, upper)

    def excess(c):
        return np.clip(c, demand, upper).mean() - c

    lo, hi = float(demand.min()), float(demand.max())
    if excess(lo) <= 0:
        hi = lo
    # excess is non-increasing in c; keep excess(lo) > 0 >= excess(hi)
    for _ in range(200):
        if hi - lo <= tol * max(1.0, abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    g = np.clip(hi, demand, upper)
    return GenerationPlan(g=g, g_bar=float(g.mean()), u_rc=retailer_objective(g))


def dispatch(gen: GenModel, demand: np.ndarray, mode: str = "demand") -> GenerationPlan:
    """Generation serving ``demand``: either demand itself or the flattened plan."""
    if mode == "plan":
        return generation_plan(gen, demand)
    demand = np.asarray(demand, dtype=float)
    _check_caps(demand, gen.upper)
    g = demand.copy()
    return GenerationPlan(g=g, g_bar=float(g.mean()), u_rc=retailer_objective(g))
