"""Scenario configuration: domain types, JSON loading/saving and validation.

All defaults live in ``DEFAULT_CONFIG``; ``default_scenario()`` is simply the
empty config resolved against it. Vectors may be given either as a scalar
(broadcast over the day) or as one value per slot.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError

SCHEMA_VERSION = 1

DEFAULT_CONFIG: dict = {
    "schema_version": SCHEMA_VERSION,
    "grid": {"slot_count": 24, "slot_hours": 1.0},
    "generation": {
        # money/kW^2 per slot, money/kW, money
        "a": 0.01,
        "b": 0.2,
        "c": 0.0,
        "lambda": 1.2,
        # kW; effectively unbounded unless overridden
        "g_cap": 1.0e6,
        "l_cap": 1.0e6,
        # optional per-window overrides: [{"start_hour", "end_hour", "a", "b", ...}]
        "windows": [],
    },
    "groups": [
        {"name": "group1", "count": 50, "omega": 5.0, "theta": 0.1,
         "min_frac": 0.70, "max_frac": 1.50, "nominal": {"profile": "residential-v1"}, "has_bev": True},
        {"name": "group2", "count": 100, "omega": 5.5, "theta": 0.1,
         "min_frac": 0.75, "max_frac": 1.40, "nominal": {"profile": "residential-v1"}, "has_bev": False},
        {"name": "group3", "count": 100, "omega": 6.0, "theta": 0.1,
         "min_frac": 0.80, "max_frac": 1.20, "nominal": {"profile": "residential-v1"}, "has_bev": False},
    ],
    "fleet": [
        {"label": "compact sedan (i3)", "market_share": 0.5148,
         "battery_kwh": 33.0, "rated_kw": 7.0, "range_miles": 114.0},
        {"label": "mid-size sedan (Model S)", "market_share": 0.1035,
         "battery_kwh": 75.0, "rated_kw": 11.5, "range_miles": 259.0},
        {"label": "mid-size SUV (Model X)", "market_share": 0.3817,
         "battery_kwh": 100.0, "rated_kw": 17.2, "range_miles": 295.0},
    ],
    "behavior": {
        # hours of day; departure is on the following morning
        "arrival": {"family": "normal", "mean": 17.5, "sd": 2.5, "low": 12.0, "high": 23.9},
        "departure": {"family": "normal", "mean": 7.5, "sd": 1.5, "low": 4.0, "high": 12.0},
        # miles; the upper bound is further capped by each vehicle's range
        "distance": {"family": "lognormal", "median": 25.0, "sigma": 0.6, "low": 1.0, "high": 295.0},
    },
    "bev_count": 50,
    # None -> length of each vehicle's home window
    "t_max_active": None,
    "trials": 200,
    "seed": 42,
    "max_rounds": 50,
    "epsilon": 1.0e-3,
    # "demand": dispatched generation equals aggregate demand
    # "plan": variance-minimising generation plan inside the demand/capacity box
    "generation_mode": "demand",
    # group names in update order; None -> config order
    "update_order": None,
    # flat price in the no-response baseline:
    # "revenue-neutral": collects what marginal-cost pricing of the baseline load would
    # "mean-nominal": lambda * (a * mean nominal household aggregate + b)
    "baseline_tariff": "revenue-neutral",
}

DIST_FAMILIES = {
    "point": ("value",),
    "normal": ("mean", "sd"),
    "lognormal": ("median", "sigma"),
    "uniform": (),
    "histogram": ("edges", "weights"),
}

GENERATION_MODES = ("demand", "plan")
BASELINE_TARIFFS = ("revenue-neutral", "mean-nominal")


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class TimeGrid:
    slot_count: int = 24
    slot_hours: float = 1.0

    def slot_of_hour(self, hour: float) -> int:
        """Slot index containing ``hour`` (hours wrap around the day)."""
        day = self.slot_count * self.slot_hours
        return int(math.floor((hour % day) / self.slot_hours + 1e-9)) % self.slot_count


@dataclass(frozen=True, eq=False)
class GenModel:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    lam: np.ndarray
    g_cap: np.ndarray
    l_cap: np.ndarray

    @property
    def upper(self) -> np.ndarray:
        return np.minimum(self.g_cap, self.l_cap)


@dataclass(frozen=True, eq=False)
class UserGroup:
    name: str
    count: int
    omega: np.ndarray
    theta: float
    min_frac: float
    max_frac: float
    nominal: np.ndarray
    has_bev: bool = False

    @property
    def lo(self) -> np.ndarray:
        return self.min_frac * self.nominal

    @property
    def hi(self) -> np.ndarray:
        return self.max_frac * self.nominal

    @property
    def daily_total(self) -> float:
        return float(self.nominal.sum())


@dataclass(frozen=True, eq=False)
class BevSpec:
    label: str
    market_share: float
    battery_kwh: float
    rated_kw: float
    range_miles: float

    @property
    def kwh_per_mile(self) -> float:
        return self.battery_kwh / self.range_miles


@dataclass(frozen=True, eq=False)
class DistSpec:
    """One behavior distribution: family tag, its parameters and truncation bounds."""

    family: str
    params: dict
    low: float
    high: float


@dataclass(frozen=True, eq=False)
class BehaviorDistributions:
    arrival: DistSpec
    departure: DistSpec
    distance: DistSpec


@dataclass(frozen=True, eq=False)
class Scenario:
    grid: TimeGrid
    gen: GenModel
    groups: tuple
    fleet: tuple
    behavior: BehaviorDistributions
    bev_count: int
    t_max_active: int | None
    trials: int
    seed: int
    max_rounds: int
    epsilon: float
    generation_mode: str = "demand"
    update_order: tuple | None = None
    baseline_tariff: str = "revenue-neutral"

    def replace(self, **changes) -> "Scenario":
        """Copy with top-level fields overridden; re-validated."""
        d = to_dict(self)
        d.update(changes)
        return from_dict(d)

    def group_order(self) -> list[int]:
        if self.update_order is None:
            return list(range(len(self.groups)))
        names = [g.name for g in self.groups]
        return [names.index(n) for n in self.update_order]


# ---------------------------------------------------------------------------
# parsing


def _merge(base: dict, override: dict) -> dict:
    if "family" in override and override.get("family") != base.get("family"):
        return copy.deepcopy(override)  # a new family brings its own parameters and bounds
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key not in ("nominal",):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _vector(value, n: int, what: str) -> np.ndarray:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return np.full(n, float(value))
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what}: expected a number or a list of {n} numbers") from exc
    if arr.shape != (n,):
        raise ConfigError(f"{what}: vector length {arr.size} does not match slot_count {n}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{what}: values must be finite")
    return arr


def _number(d: dict, key: str, what: str) -> float:
    value = d.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{what}.{key}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{what}.{key}: must be finite")
    return float(value)


def _integer(d: dict, key: str, what: str) -> int:
    value = d.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{what}.{key}: expected an integer, got {value!r}")
    return value


def load_profiles() -> dict:
    """Nominal load profiles shipped with the package, keyed by name."""
    text = resources.files("stackdr").joinpath("data/nominal_profiles.json").read_text()
    return json.loads(text)["profiles"]


def _nominal(value, n: int, what: str) -> np.ndarray:
    if isinstance(value, dict):
        name = value.get("profile")
        profiles = load_profiles()
        if name not in profiles:
            raise ConfigError(f"{what}: unknown nominal profile {name!r}")
        scale = float(value.get("scale", 1.0))
        return _vector(profiles[name], n, what) * scale
    return _vector(value, n, what)


def _gen_model(d: dict, grid: TimeGrid) -> GenModel:
    n = grid.slot_count
    fields = {k: _vector(d[k], n, f"generation.{k}") for k in ("a", "b", "c", "lambda", "g_cap", "l_cap")}
    for i, w in enumerate(d.get("windows") or []):
        start, end = float(w["start_hour"]), float(w["end_hour"])
        slots = [t for t in range(n) if start <= t * grid.slot_hours < end]
        for key, value in w.items():
            if key in ("start_hour", "end_hour"):
                continue
            if key not in fields:
                raise ConfigError(f"generation.windows[{i}]: unknown coefficient {key!r}")
            fields[key][slots] = float(value)
    if np.any(fields["a"] <= 0):
        raise ConfigError("generation.a: cost curvature a_t must be > 0 (strictly convex cost)")
    if np.any(fields["b"] < 0):
        raise ConfigError("generation.b: linear cost coefficient b_t must be >= 0")
    if np.any(fields["lambda"] < 1):
        raise ConfigError("generation.lambda: profit coefficient must be >= 1")
    if np.any(fields["g_cap"] <= 0) or np.any(fields["l_cap"] <= 0):
        raise ConfigError("generation.g_cap/l_cap: capacity bounds must be > 0")
    return GenModel(
        a=_frozen(fields["a"]),
        b=_frozen(fields["b"]),
        c=_frozen(fields["c"]),
        lam=_frozen(fields["lambda"]),
        g_cap=_frozen(fields["g_cap"]),
        l_cap=_frozen(fields["l_cap"]),
    )


def _group(d: dict, n: int, i: int) -> UserGroup:
    what = f"groups[{i}]"
    theta = _number(d, "theta", what)
    omega = _vector(d.get("omega"), n, f"{what}.omega")
    min_frac = _number(d, "min_frac", what)
    max_frac = _number(d, "max_frac", what)
    nominal = _nominal(d.get("nominal"), n, f"{what}.nominal")
    count = _integer(d, "count", what)
    if theta <= 0:
        raise ConfigError(f"{what}.theta: satisfaction curvature theta must be > 0")
    if np.any(omega <= 0):
        raise ConfigError(f"{what}.omega: preference parameter omega must be > 0")
    if not 0 <= min_frac <= 1 <= max_frac:
        raise ConfigError(f"{what}: demand bounds must satisfy 0 <= min_frac <= 1 <= max_frac")
    if np.any(nominal < 0):
        raise ConfigError(f"{what}.nominal: nominal load must be >= 0")
    if count < 0:
        raise ConfigError(f"{what}.count: must be >= 0")
    return UserGroup(
        name=str(d.get("name", f"group{i + 1}")),
        count=count,
        omega=_frozen(omega),
        theta=theta,
        min_frac=min_frac,
        max_frac=max_frac,
        nominal=_frozen(nominal),
        has_bev=bool(d.get("has_bev", False)),
    )


def _bev_spec(d: dict, i: int) -> BevSpec:
    what = f"fleet[{i}]"
    spec = BevSpec(
        label=str(d.get("label", f"bev{i}")),
        market_share=_number(d, "market_share", what),
        battery_kwh=_number(d, "battery_kwh", what),
        rated_kw=_number(d, "rated_kw", what),
        range_miles=_number(d, "range_miles", what),
    )
    if min(spec.battery_kwh, spec.rated_kw, spec.range_miles) <= 0 or spec.market_share < 0:
        raise ConfigError(f"{what}: battery, power and range must be > 0 and share >= 0")
    return spec


def _dist(d: dict, what: str) -> DistSpec:
    family = d.get("family")
    if family not in DIST_FAMILIES:
        raise ConfigError(f"{what}.family: unknown family {family!r} (expected one of {sorted(DIST_FAMILIES)})")
    params = {}
    for key in DIST_FAMILIES[family]:
        if key not in d:
            raise ConfigError(f"{what}: family {family!r} requires {key!r}")
        params[key] = d[key]
    if family == "point":
        value = _number(d, "value", what)
        low, high = float(d.get("low", value)), float(d.get("high", value))
    else:
        low, high = _number(d, "low", what), _number(d, "high", what)
    if not (math.isfinite(low) and math.isfinite(high)) or low > high:
        raise ConfigError(f"{what}: truncation bounds must be finite with low <= high")
    if family == "normal" and float(params["sd"]) <= 0:
        raise ConfigError(f"{what}.sd: must be > 0")
    if family == "lognormal" and (float(params["median"]) <= 0 or float(params["sigma"]) <= 0):
        raise ConfigError(f"{what}: lognormal median and sigma must be > 0")
    if family == "histogram":
        edges = [float(x) for x in params["edges"]]
        weights = [float(x) for x in params["weights"]]
        if len(edges) != len(weights) + 1 or any(b <= a for a, b in zip(edges, edges[1:])):
            raise ConfigError(f"{what}: histogram needs increasing edges and len(edges) == len(weights) + 1")
        if any(w < 0 for w in weights) or sum(weights) <= 0:
            raise ConfigError(f"{what}: histogram weights must be >= 0 with a positive sum")
        params = {"edges": edges, "weights": weights}
    else:
        params = {k: float(v) for k, v in params.items()}
    return DistSpec(family=family, params=params, low=low, high=high)


def _histogram_file(d: dict, base: Path | None) -> dict:
    """Inline a histogram given as a file of ``value,weight`` rows (bin starts)."""
    if d.get("family") != "histogram" or "file" not in d:
        return d
    path = Path(d["file"])
    if base is not None and not path.is_absolute():
        path = base / path
    try:
        rows = [line.split(",") for line in path.read_text().splitlines() if line.strip() and not line.startswith("#")]
        starts = [float(r[0]) for r in rows]
        weights = [float(r[1]) for r in rows]
    except (OSError, ValueError, IndexError) as exc:
        raise ConfigError(f"histogram file {path}: {exc}") from exc
    width = starts[1] - starts[0] if len(starts) > 1 else 1.0
    out = {k: v for k, v in d.items() if k != "file"}
    out["edges"] = starts + [starts[-1] + width]
    out["weights"] = weights
    return out


def from_dict(config: dict, base_dir: Path | None = None) -> Scenario:
    """Resolve ``config`` against the defaults and validate it."""
    if not isinstance(config, dict):
        raise ConfigError("scenario config must be a JSON object")
    unknown = set(config) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    d = _merge(DEFAULT_CONFIG, config)
    if d["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {d['schema_version']!r}")

    g = d["grid"]
    grid = TimeGrid(slot_count=_integer(g, "slot_count", "grid"), slot_hours=_number(g, "slot_hours", "grid"))
    if grid.slot_count < 2:
        raise ConfigError("grid.slot_count must be >= 2")
    if grid.slot_hours <= 0:
        raise ConfigError("grid.slot_hours must be > 0")
    n = grid.slot_count

    gen = _gen_model(d["generation"], grid)
    groups = tuple(_group(gd, n, i) for i, gd in enumerate(d["groups"]))
    names = [grp.name for grp in groups]
    if len(set(names)) != len(names):
        raise ConfigError("group names must be unique")
    fleet = tuple(_bev_spec(fd, i) for i, fd in enumerate(d["fleet"]))

    bev_count = _integer(d, "bev_count", "config")
    if bev_count < 0:
        raise ConfigError("bev_count must be >= 0")
    owners = sum(grp.count for grp in groups if grp.has_bev)
    if bev_count > owners:
        raise ConfigError(f"bev_count {bev_count} exceeds the {owners} users in BEV-owning groups")
    if bev_count > 0:
        if not fleet:
            raise ConfigError("fleet must not be empty when bev_count > 0")
        total = sum(f.market_share for f in fleet)
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"fleet market shares must sum to 1 (got {total:.12g})")

    b = d["behavior"]
    behavior = BehaviorDistributions(
        arrival=_dist(_histogram_file(b["arrival"], base_dir), "behavior.arrival"),
        departure=_dist(_histogram_file(b["departure"], base_dir), "behavior.departure"),
        distance=_dist(_histogram_file(b["distance"], base_dir), "behavior.distance"),
    )
    if behavior.distance.low < 0:
        raise ConfigError("behavior.distance.low must be >= 0")

    t_max = d["t_max_active"]
    if t_max is not None:
        t_max = _integer(d, "t_max_active", "config")
        if t_max < 0:
            raise ConfigError("t_max_active must be >= 0")
    trials = _integer(d, "trials", "config")
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    seed = _integer(d, "seed", "config")
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    max_rounds = _integer(d, "max_rounds", "config")
    if max_rounds < 1:
        raise ConfigError("max_rounds must be >= 1")
    epsilon = _number(d, "epsilon", "config")
    if epsilon <= 0:
        raise ConfigError("epsilon must be > 0")
    mode = d["generation_mode"]
    if mode not in GENERATION_MODES:
        raise ConfigError(f"generation_mode must be one of {GENERATION_MODES}")
    order = d["update_order"]
    if order is not None:
        order = tuple(str(x) for x in order)
        if sorted(order) != sorted(names):
            raise ConfigError("update_order must list every group name exactly once")

    tariff = d["baseline_tariff"]
    if tariff not in BASELINE_TARIFFS:
        raise ConfigError(f"baseline_tariff must be one of {BASELINE_TARIFFS}")

    return Scenario(
        grid=grid, gen=gen, groups=groups, fleet=fleet, behavior=behavior,
        bev_count=bev_count, t_max_active=t_max, trials=trials, seed=seed,
        max_rounds=max_rounds, epsilon=epsilon, generation_mode=mode, update_order=order,
        baseline_tariff=tariff,
    )


def _dist_dict(ds: DistSpec) -> dict:
    return {"family": ds.family, **ds.params, "low": ds.low, "high": ds.high}


def to_dict(s: Scenario) -> dict:
    """Fully resolved config; ``from_dict(to_dict(s))`` reproduces ``s``."""
    gen = s.gen
    return {
        "schema_version": SCHEMA_VERSION,
        "grid": {"slot_count": s.grid.slot_count, "slot_hours": s.grid.slot_hours},
        "generation": {
            "a": gen.a.tolist(), "b": gen.b.tolist(), "c": gen.c.tolist(),
            "lambda": gen.lam.tolist(), "g_cap": gen.g_cap.tolist(), "l_cap": gen.l_cap.tolist(),
            "windows": [],
        },
        "groups": [
            {"name": g.name, "count": g.count, "omega": g.omega.tolist(), "theta": g.theta,
             "min_frac": g.min_frac, "max_frac": g.max_frac, "nominal": g.nominal.tolist(),
             "has_bev": g.has_bev}
            for g in s.groups
        ],
        "fleet": [
            {"label": f.label, "market_share": f.market_share, "battery_kwh": f.battery_kwh,
             "rated_kw": f.rated_kw, "range_miles": f.range_miles}
            for f in s.fleet
        ],
        "behavior": {
            "arrival": _dist_dict(s.behavior.arrival),
            "departure": _dist_dict(s.behavior.departure),
            "distance": _dist_dict(s.behavior.distance),
        },
        "bev_count": s.bev_count,
        "t_max_active": s.t_max_active,
        "trials": s.trials,
        "seed": s.seed,
        "max_rounds": s.max_rounds,
        "epsilon": s.epsilon,
        "generation_mode": s.generation_mode,
        "update_order": None if s.update_order is None else list(s.update_order),
        "baseline_tariff": s.baseline_tariff,
    }


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc.strerror}") from exc
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON at line {exc.lineno}: {exc.msg}") from exc
    return from_dict(config, base_dir=path.parent)


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(json.dumps(to_dict(s), indent=2) + "\n")


def default_scenario() -> Scenario:
    return from_dict({})


def nominal_aggregate(s: Scenario) -> np.ndarray:
    """Sum of count * nominal over groups (household load only, no BEVs)."""
    total = np.zeros(s.grid.slot_count)
    for g in s.groups:
        total += g.count * g.nominal
    return total
