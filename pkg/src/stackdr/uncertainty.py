"""Monte Carlo draws of BEV driver behavior and the resulting vehicle agents.

Every draw comes from its own counter-based stream keyed by
(seed, trial, vehicle, purpose), so results do not depend on the order or
process in which trials are sampled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from . import bev
from .errors import RejectionBudgetExceeded
from .scenario import BehaviorDistributions, BevSpec, DistSpec, Scenario, TimeGrid

REJECTION_BUDGET = 1000
PURPOSES = {"type": 0, "behavior": 1}


@dataclass(frozen=True)
class RngStream:
    seed: int
    trial: int
    vehicle: int
    purpose: str

    def generator(self) -> np.random.Generator:
        key = (self.trial, self.vehicle, PURPOSES[self.purpose])
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=key)))


@dataclass(frozen=True, eq=False)
class BevAgent:
    index: int
    spec: BevSpec
    arrival_slot: int
    departure_slot: int
    distance_miles: float
    soc_arrival: float
    t_req: int
    t_max: int
    home_slots: tuple


def _as_generator(rng) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngStream) else rng


def sample_type(fleet, rng) -> BevSpec:
    gen = _as_generator(rng)
    shares = np.array([f.market_share for f in fleet])
    idx = int(np.searchsorted(np.cumsum(shares), gen.random() * shares.sum(), side="right"))
    return fleet[min(idx, len(fleet) - 1)]


def draw(dist: DistSpec, rng, size=None, high=None):
    """Truncated draw(s) from ``dist``; ``high`` tightens the upper bound."""
    gen = _as_generator(rng)
    lo, hi = dist.low, dist.high if high is None else min(dist.high, high)
    fam, par = dist.family, dist.params
    if fam == "point":
        out = np.full(() if size is None else size, min(max(par["value"], lo), hi))
    elif fam == "uniform":
        out = gen.uniform(lo, hi, size)
    elif fam in ("normal", "lognormal"):
        if fam == "normal":
            mu, sd, a, b = par["mean"], par["sd"], lo, hi
        else:
            mu, sd = np.log(par["median"]), par["sigma"]
            a = np.log(lo) if lo > 0 else -np.inf
            b = np.log(hi)
        # inverse-cdf sampling restricted to [cdf(a), cdf(b)]
        pa, pb = ndtr((a - mu) / sd), ndtr((b - mu) / sd)
        z = mu + sd * ndtri(pa + (pb - pa) * gen.random(size))
        out = np.clip(np.exp(z) if fam == "lognormal" else z, lo, hi)
    elif fam == "histogram":
        raw = np.asarray(par["edges"], dtype=float)
        edges = np.clip(raw, lo, hi)
        widths = np.diff(edges)
        full = np.diff(raw)
        weights = np.asarray(par["weights"], dtype=float) * np.divide(widths, full, out=np.zeros_like(widths), where=full > 0)
        if weights.sum() <= 0:
            raise RejectionBudgetExceeded("histogram has no mass inside its truncation bounds")
        cdf = np.cumsum(weights) / weights.sum()
        k = np.minimum(np.searchsorted(cdf, gen.random(size), side="right"), len(weights) - 1)
        out = edges[k] + widths[k] * gen.random(size)
    else:  # pragma: no cover - rejected at config time
        raise ValueError(f"unknown distribution family {fam!r}")
    return float(out) if size is None else out


def home_window(grid: TimeGrid, arrival_slot: int, departure_slot: int) -> tuple:
    """Slots from arrival up to (excluding) departure, wrapping past midnight."""
    n = grid.slot_count
    length = (departure_slot - arrival_slot) % n
    return tuple((arrival_slot + i) % n for i in range(length))


def sample_behavior(dists: BehaviorDistributions, rng, grid: TimeGrid | None = None,
                    spec: BevSpec | None = None, t_max_active: int | None = None):
    """(arrival hour, departure hour, distance) with hours floored to slot starts.

    Draws are repeated until the home window is non-empty and, when a vehicle
    is given, long enough (and within the active-hours cap) to refill it.
    """
    grid = grid or TimeGrid()
    gen = _as_generator(rng)
    cap = None if spec is None else spec.range_miles
    for _ in range(REJECTION_BUDGET):
        a_slot = grid.slot_of_hour(draw(dists.arrival, gen))
        d_slot = grid.slot_of_hour(draw(dists.departure, gen))
        distance = draw(dists.distance, gen, high=cap)
        window = home_window(grid, a_slot, d_slot)
        if not window:
            continue
        if spec is not None:
            t_req = bev.required_hours(spec, distance)
            t_max = len(window) if t_max_active is None else min(t_max_active, len(window))
            if t_req > t_max:
                continue
        return a_slot * grid.slot_hours, d_slot * grid.slot_hours, distance
    raise RejectionBudgetExceeded(f"no feasible behavior draw in {REJECTION_BUDGET} attempts")


def build_agent(i: int, s: Scenario, trial: int) -> BevAgent:
    spec = sample_type(s.fleet, RngStream(s.seed, trial, i, "type"))
    arrival, departure, distance = sample_behavior(
        s.behavior, RngStream(s.seed, trial, i, "behavior"), s.grid, spec, s.t_max_active)
    a_slot, d_slot = s.grid.slot_of_hour(arrival), s.grid.slot_of_hour(departure)
    window = home_window(s.grid, a_slot, d_slot)
    t_max = len(window) if s.t_max_active is None else min(s.t_max_active, len(window))
    return BevAgent(
        index=i, spec=spec, arrival_slot=a_slot, departure_slot=d_slot,
        distance_miles=distance, soc_arrival=bev.arrival_soc(spec, distance),
        t_req=bev.required_hours(spec, distance), t_max=t_max, home_slots=window,
    )


def build_agents(s: Scenario, trial: int) -> list[BevAgent]:
    return [build_agent(i, s, trial) for i in range(s.bev_count)]


def to_problem(agent: BevAgent, omega, theta: float, price, t_max: int | None = None) -> bev.BevProblem:
    return bev.BevProblem(
        spec=agent.spec, home_slots=agent.home_slots, soc_arrival=agent.soc_arrival,
        t_req=agent.t_req, t_max=agent.t_max if t_max is None else t_max,
        omega=omega, theta=theta, price=price,
    )
