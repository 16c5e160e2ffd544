"""Exception types raised by the simulator."""


class StackdrError(Exception):
    """Base class for all simulator errors."""


class ConfigError(StackdrError):
    """Malformed scenario file or a violated configuration invariant."""


class CurtailmentRequired(StackdrError):
    """Demand at a slot exceeds the generation/load cap; the retailer would have to curtail."""

    def __init__(self, slot, demand, cap, trial=None):
        self.slot = slot
        self.demand = demand
        self.cap = cap
        self.trial = trial
        where = f"slot {slot}" if trial is None else f"trial {trial}, slot {slot}"
        super().__init__(f"curtailment required at {where}: demand {demand:.6g} kW > cap {cap:.6g} kW")


class Infeasible(StackdrError):
    """Household problem whose bounds cannot meet the daily energy total."""


class InfeasibleWindow(StackdrError):
    """BEV home window too short for the required charging hours."""


class DistanceExceedsRange(StackdrError):
    """Driven distance larger than the vehicle's single-charge range."""


class RejectionBudgetExceeded(StackdrError):
    """Behavior sampler could not produce a feasible draw."""
