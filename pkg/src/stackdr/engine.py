"""Iterative leader-follower game between the retailer and its users.

The retailer prices the current aggregate demand; users then revise their
decisions one at a time (never simultaneously), each best-responding to the
prices implied by the aggregate at that moment. Rounds repeat until the
aggregate load stops moving.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from dataclasses import dataclass, field, replace

import numpy as np

from . import bev, pricing, uncertainty
from .errors import CurtailmentRequired
from .household import HouseholdProblem, best_response, household_objective
from .scenario import Scenario, nominal_aggregate

log = logging.getLogger(__name__)

MODES = ("both", "baseline", "rtp-v2g", "rtp-only")


@dataclass(frozen=True, eq=False)
class User:
    index: int
    group: int
    agent: int | None  # index into the trial's BEV agents, if this user owns one


@dataclass(eq=False)
class GameState:
    household_loads: np.ndarray  # (users, slots) kW
    schedules: list  # BevSchedule per agent
    aggregate: np.ndarray
    plan: pricing.GenerationPlan
    prices: np.ndarray
    round: int = 0

    def copy(self) -> "GameState":
        return replace(self, household_loads=self.household_loads.copy(), schedules=list(self.schedules),
                       aggregate=self.aggregate.copy())

    @property
    def bev_actions(self) -> np.ndarray:
        if not self.schedules:
            return np.zeros((0, self.aggregate.size), dtype=np.int8)
        return np.stack([sch.s for sch in self.schedules])


@dataclass(eq=False)
class TrialResult:
    trial: int
    mode: str
    converged: bool
    rounds: int
    final: GameState | None
    baseline: GameState
    agents: list
    u_rc_history: list = field(default_factory=list)  # initial broadcast, then after each round
    max_energy_drift: float = 0.0  # largest relative change of any user's daily energy
    min_update_gain: float = 0.0  # smallest own-utility change over all committed updates


class Game:
    """Static data of one trial: users, sampled vehicles and per-user parameters."""

    def __init__(self, s: Scenario, trial: int, v2g: bool = True, agents=None):
        self.scenario = s
        self.trial = trial
        self.v2g = v2g
        self.agents = uncertainty.build_agents(s, trial) if agents is None else agents
        self.users: list[User] = []
        next_agent = 0
        owners: dict[int, int] = {}
        for gi, g in enumerate(s.groups):
            for _ in range(g.count):
                uid = len(self.users)
                agent = None
                if g.has_bev and next_agent < len(self.agents):
                    agent, next_agent = next_agent, next_agent + 1
                    owners[agent] = uid
                self.users.append(User(uid, gi, agent))
        self.owner_of_agent = [owners[a] for a in range(len(self.agents))]
        self.order = [u.index for gi in s.group_order() for u in self.users if u.group == gi]
        self.pw = np.array([a.spec.rated_kw for a in self.agents])

    # -- helpers -----------------------------------------------------------

    def group(self, user: int):
        return self.scenario.groups[self.users[user].group]

    def household_problem(self, user: int, prices: np.ndarray) -> HouseholdProblem:
        g = self.group(user)
        return HouseholdProblem(omega=g.omega, theta=g.theta, lo=g.lo, hi=g.hi,
                                daily_total=g.daily_total, price=prices)

    def bev_problem(self, agent: int, prices: np.ndarray) -> bev.BevProblem:
        g = self.group(self.owner_of_agent[agent])
        a = self.agents[agent]
        return uncertainty.to_problem(a, g.omega, g.theta, prices, t_max=None if self.v2g else a.t_req)

    def aggregate(self, loads: np.ndarray, schedules) -> np.ndarray:
        total = loads.sum(axis=0)
        for a, sch in enumerate(schedules):
            total = total + sch.s * self.pw[a]
        return total

    def dispatch(self, aggregate: np.ndarray) -> tuple[pricing.GenerationPlan, np.ndarray]:
        try:
            plan = pricing.dispatch(self.scenario.gen, aggregate, self.scenario.generation_mode)
        except CurtailmentRequired as exc:
            raise CurtailmentRequired(exc.slot, exc.demand, exc.cap, trial=self.trial) from None
        return plan, pricing.price(self.scenario.gen, plan.g)

    def state(self, loads, schedules, prices=None, round=0) -> GameState:
        agg = self.aggregate(loads, schedules)
        plan, rtp = self.dispatch(agg)
        return GameState(loads, list(schedules), agg, plan, rtp if prices is None else prices, round)

    # -- initial / baseline ------------------------------------------------

    def nominal_loads(self) -> np.ndarray:
        return np.array([self.group(u.index).nominal for u in self.users]).reshape(len(self.users), -1)

    def uncontrolled(self, prices: np.ndarray) -> list:
        return [bev.uncontrolled_schedule(self.bev_problem(a, prices)) for a in range(len(self.agents))]


def utility_of_user(game: Game, state: GameState, user: int, prices: np.ndarray) -> float:
    """Household satisfaction plus BEV satisfaction minus payments at ``prices``."""
    value = household_objective(game.household_problem(user, prices), state.household_loads[user])
    agent = game.users[user].agent
    if agent is not None:
        value += bev.bev_objective(game.bev_problem(agent, prices), state.schedules[agent].s)
    return value


def own_contribution(game: Game, state: GameState, user: int) -> np.ndarray:
    x = state.household_loads[user].copy()
    agent = game.users[user].agent
    if agent is not None:
        x = x + state.schedules[agent].s * game.pw[agent]
    return x


def prices_for(game: Game, state: GameState, user: int) -> np.ndarray:
    """Prices ``user`` responds to: the retailer's price of everyone else's demand."""
    others = np.maximum(state.aggregate - own_contribution(game, state, user), 0.0)
    if game.scenario.generation_mode == "demand":
        return pricing.price(game.scenario.gen, others)
    return game.dispatch(others)[1]


def _respond(game: Game, state: GameState, user: int, prices: np.ndarray):
    load = best_response(game.household_problem(user, prices)).load
    agent = game.users[user].agent
    if agent is None:
        return load, None
    problem = game.bev_problem(agent, prices)
    schedule = bev.optimize_schedule(problem)
    current = state.schedules[agent]
    # an equally good incumbent schedule is kept, so only strict improvements move
    if bev.bev_objective(problem, current.s) >= schedule.objective - bev.TIE_TOL * max(1.0, abs(schedule.objective)):
        schedule = current
    return load, schedule


def _commit(game: Game, state: GameState, user: int, refresh: bool = True) -> float:
    """Best-respond ``user`` in place; returns the change of its utility at the prices used.

    With ``refresh=False`` the aggregate is updated incrementally and the
    plan/prices are left for the caller to refresh.
    """
    prices = prices_for(game, state, user)
    before = utility_of_user(game, state, user, prices)
    old = own_contribution(game, state, user)
    load, schedule = _respond(game, state, user, prices)
    state.household_loads[user] = load
    agent = game.users[user].agent
    if schedule is not None:
        state.schedules[agent] = schedule
    if refresh:
        _refresh(game, state)
    else:
        state.aggregate = state.aggregate + (own_contribution(game, state, user) - old)
    return utility_of_user(game, state, user, prices) - before


def _refresh(game: Game, state: GameState) -> None:
    state.aggregate = game.aggregate(state.household_loads, state.schedules)
    state.plan, state.prices = game.dispatch(state.aggregate)


def user_update(state: GameState, user: int, game: Game) -> GameState:
    """New state in which only ``user`` has re-optimised against the others' prices."""
    out = state.copy()
    _commit(game, out, user)
    return out


def conventional_tariff(s: Scenario, plan: pricing.GenerationPlan, demand: np.ndarray, kind: str) -> np.ndarray:
    """Flat price used when users do not respond to real-time prices."""
    gen = s.gen
    if kind == "mean-nominal":
        level = gen.lam * (gen.a * nominal_aggregate(s).mean() + gen.b)
        return np.full(demand.size, float(np.mean(level))) if np.ptp(level) else level
    # revenue-neutral: same total payment as marginal-cost pricing of this load
    rtp = pricing.price(gen, plan.g)
    energy = float(demand.sum())
    flat = float(np.dot(rtp, demand) / energy) if energy > 0 else float(rtp.mean())
    return np.full(demand.size, flat)


def baseline_state(game: Game, kind: str = "revenue-neutral") -> GameState:
    s = game.scenario
    loads = game.nominal_loads()
    schedules = game.uncontrolled(np.zeros(s.grid.slot_count))
    state = game.state(loads, schedules)
    state.prices = conventional_tariff(s, state.plan, state.aggregate, kind)
    return state


def _energy_drift(game: Game, loads: np.ndarray) -> float:
    totals = np.array([game.group(u.index).daily_total for u in game.users])
    if totals.size == 0:
        return 0.0
    return float(np.max(np.abs(loads.sum(axis=1) - totals) / np.maximum(totals, 1e-300)))


def play(game: Game, start: GameState) -> tuple[GameState, bool, list, float, float]:
    """Round-robin best responses from ``start`` until the aggregate settles."""
    s = game.scenario
    state = start.copy()
    state.round = 0
    history = [state.plan.u_rc]  # the first broadcast, before anyone responds
    drift, gain = 0.0, np.inf
    converged = False
    for r in range(1, s.max_rounds + 1):
        previous = state.aggregate.copy()
        for user in game.order:
            gain = min(gain, _commit(game, state, user, refresh=False))
        _refresh(game, state)
        state.round = r
        history.append(state.plan.u_rc)
        drift = max(drift, _energy_drift(game, state.household_loads))
        change = np.max(np.abs(state.aggregate - previous) / np.maximum(1.0, previous))
        if change < s.epsilon:
            converged = True
            break
    if not converged:
        log.warning("trial %d: no convergence after %d rounds", game.trial, s.max_rounds)
    return state, converged, history, drift, (0.0 if gain == np.inf else float(gain))


def run_trial(s: Scenario, trial: int, mode: str = "both") -> TrialResult:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    game = Game(s, trial, v2g=(mode != "rtp-only"))
    base = baseline_state(game, s.baseline_tariff)
    if mode == "baseline":
        return TrialResult(trial, mode, True, 0, None, base, game.agents)
    start = game.state(base.household_loads.copy(), base.schedules)
    final, converged, history, drift, gain = play(game, start)
    return TrialResult(trial, mode, converged, final.round, final, base, game.agents,
                       u_rc_history=history, max_energy_drift=drift, min_update_gain=gain)


def run_trials(s: Scenario, mode: str = "both", workers: int = 1) -> list[TrialResult]:
    """All ``s.trials`` trials, in trial order; identical for any worker count."""
    trials = range(s.trials)
    if workers <= 1 or s.trials == 1:
        return [run_trial(s, t, mode) for t in trials]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(partial(run_trial, s, mode=mode), trials, chunksize=max(1, s.trials // (4 * workers))))
