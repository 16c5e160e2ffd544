"""Leader-follower demand-response simulator.

One retailer prices electricity at a markup over marginal generation cost;
households shift flexible load and BEV owners schedule charging/discharging in
response. Driver behavior is sampled by Monte Carlo.
"""

from .engine import GameState, TrialResult, run_trial, run_trials, user_update
from .scenario import Scenario, default_scenario, load_scenario, nominal_aggregate

__all__ = [
    "GameState", "Scenario", "TrialResult", "default_scenario", "load_scenario",
    "nominal_aggregate", "run_trial", "run_trials", "user_update",
]
__version__ = "0.1.0"
