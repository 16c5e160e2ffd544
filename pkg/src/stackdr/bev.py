"""BEV charge/discharge scheduling over hourly actions s_t in {-1, 0, +1}.

A vehicle is home for an ordered (possibly midnight-wrapping) list of slots.
It must finish with a full battery: net charging hours equal the required
hours, and total active hours are capped. Each action is worth

    psi_t(s P) - price_t s P,   psi_t(x) = omega_t x - theta/2 x^2

so discharging costs satisfaction but earns the slot price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DistanceExceedsRange, InfeasibleWindow
from .household import satisfaction
from .scenario import BevSpec

SOC_TOL = 1e-9
TIE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class BevProblem:
    spec: BevSpec
    home_slots: tuple
    soc_arrival: float
    t_req: int
    t_max: int
    omega: np.ndarray
    theta: float
    price: np.ndarray


@dataclass(frozen=True, eq=False)
class BevSchedule:
    s: np.ndarray  # per slot of the day, int8 in {-1, 0, 1}
    soc_path: np.ndarray  # kWh after each home-window slot, in window order
    objective: float


def energy_deficit(spec: BevSpec, distance: float) -> float:
    if distance < 0 or distance > spec.range_miles * (1 + 1e-12):
        raise DistanceExceedsRange(f"{distance:.6g} mi outside [0, {spec.range_miles:.6g}] for {spec.label}")
    return distance * spec.battery_kwh / spec.range_miles


def required_hours(spec: BevSpec, distance: float) -> int:
    """Whole hours at rated power needed to refill the energy used over ``distance``."""
    return int(math.ceil(energy_deficit(spec, distance) / spec.rated_kw - 1e-9))


def arrival_soc(spec: BevSpec, distance: float) -> float:
    return spec.battery_kwh - energy_deficit(spec, distance)


def _soc(p: BevProblem, k):
    return np.clip(p.soc_arrival + np.asarray(k) * p.spec.rated_kw, 0.0, p.spec.battery_kwh)


def action_values(p: BevProblem) -> tuple[np.ndarray, np.ndarray]:
    """Per-slot value of charging and of discharging for one hour (whole day)."""
    pw = p.spec.rated_kw
    charge = satisfaction(p.omega, p.theta, pw) - p.price * pw
    discharge = satisfaction(p.omega, p.theta, -pw) + p.price * pw
    return charge, discharge


def bev_objective(p: BevProblem, s) -> float:
    x = np.asarray(s, dtype=float) * p.spec.rated_kw
    return float(np.sum(satisfaction(p.omega, p.theta, x) - p.price * x))


def soc_path(p: BevProblem, s) -> np.ndarray:
    s = np.asarray(s)
    k = np.cumsum([s[t] for t in p.home_slots]) if p.home_slots else np.zeros(0)
    return _soc(p, k)


def is_feasible(p: BevProblem, s) -> bool:
    """Direct check of every schedule constraint by walking the SOC path."""
    s = np.asarray(s)
    home = np.zeros(s.size, dtype=bool)
    home[list(p.home_slots)] = True
    if np.any(s[~home] != 0) or int(s.sum()) != p.t_req or int(np.abs(s).sum()) > p.t_max:
        return False
    bc, pw = p.spec.battery_kwh, p.spec.rated_kw
    soc = p.soc_arrival
    net = 0
    for t in p.home_slots:
        if s[t] == 1:
            if soc >= bc - SOC_TOL:
                return False
        elif s[t] == -1:
            if soc < pw - SOC_TOL:
                return False
        net += int(s[t])
        soc = min(max(p.soc_arrival + net * pw, 0.0), bc)
    return soc >= bc - SOC_TOL


def _check_window(p: BevProblem) -> None:
    if p.t_req > len(p.home_slots):
        raise InfeasibleWindow(f"{p.t_req} charging hours needed but only {len(p.home_slots)} slots at home")
    if p.t_req > p.t_max:
        raise InfeasibleWindow(f"{p.t_req} charging hours needed but at most {p.t_max} active hours allowed")


def optimize_schedule(p: BevProblem) -> BevSchedule:
    """Exact best schedule by backward dynamic programming.

    State is (net charges k, discharges d). Active hours are k + 2d, which only
    grow, so the active-hours cap reduces to d <= (t_max - t_req) // 2.
    Charging needs a non-full battery, discharging needs at least one hour of
    rated energy stored. Ties prefer charging, then idling, earliest first.
    """
    _check_window(p)
    pw = p.spec.rated_kw
    n_slots = p.price.size
    slots = list(p.home_slots)
    w = len(slots)
    k_min = -int(math.floor(p.soc_arrival / pw + 1e-9))
    ks = np.arange(k_min, p.t_req + 1)
    d_max = (p.t_max - p.t_req) // 2
    n_k, n_d = ks.size, d_max + 1
    soc = _soc(p, ks)
    can_charge = (soc < p.spec.battery_kwh - SOC_TOL)[:, None]
    can_charge[-1] = False
    can_discharge = (soc >= pw - SOC_TOL)[:, None].repeat(n_d, axis=1)
    can_discharge[0, :] = False
    can_discharge[:, -1] = False

    charge_val, discharge_val = action_values(p)
    neg = -np.inf
    value = np.full((w + 1, n_k, n_d), neg)
    value[w, -1, :] = 0.0  # must end with k == t_req
    for j in range(w - 1, -1, -1):
        nxt = value[j + 1]
        best = nxt.copy()
        up = np.full((n_k, n_d), neg)
        up[:-1, :] = charge_val[slots[j]] + nxt[1:, :]
        up[~np.broadcast_to(can_charge, up.shape)] = neg
        down = np.full((n_k, n_d), neg)
        down[1:, :-1] = discharge_val[slots[j]] + nxt[:-1, 1:]
        down[~can_discharge] = neg
        value[j] = np.maximum(best, np.maximum(up, down))

    k_idx, d = -k_min, 0  # k == 0
    if not np.isfinite(value[0, k_idx, d]):
        raise InfeasibleWindow("no schedule reaches a full battery under the active-hours cap")
    s = np.zeros(n_slots, dtype=np.int8)
    for j, t in enumerate(slots):
        target = value[j, k_idx, d]
        tol = TIE_TOL * max(1.0, abs(target))
        if can_charge[k_idx, 0] and k_idx + 1 < n_k and \
                charge_val[t] + value[j + 1, k_idx + 1, d] >= target - tol:
            s[t], k_idx = 1, k_idx + 1
        elif value[j + 1, k_idx, d] >= target - tol:
            pass
        else:
            s[t], k_idx, d = -1, k_idx - 1, d + 1
    return BevSchedule(s=s, soc_path=soc_path(p, s), objective=bev_objective(p, s))


def uncontrolled_schedule(p: BevProblem) -> BevSchedule:
    """Charge flat out from arrival until full, no discharging."""
    if p.t_req > len(p.home_slots):
        raise InfeasibleWindow(f"{p.t_req} charging hours needed but only {len(p.home_slots)} slots at home")
    s = np.zeros(p.price.size, dtype=np.int8)
    s[list(p.home_slots[: p.t_req])] = 1
    return BevSchedule(s=s, soc_path=soc_path(p, s), objective=bev_objective(p, s))
