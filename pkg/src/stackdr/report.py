"""Per-trial metrics, cross-trial statistics and the CSV/JSON outputs."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import pricing
from .engine import TrialResult
from .errors import StackdrError
from .scenario import GenModel, Scenario, TimeGrid, to_dict

SUMMARY_SCHEMA = "stackdr.summary/1"
METRIC_KEYS = ("peak_demand_kw", "total_energy_kwh", "total_payments", "generation_cost")


def metrics(state, gen: GenModel, grid: TimeGrid | None = None) -> dict:
    """Peak, energy, payments and generation cost of one game state."""
    h = 1.0 if grid is None else grid.slot_hours
    load = state.aggregate
    return {
        "peak_demand_kw": float(load.max()),
        "total_energy_kwh": float(load.sum() * h),
        "total_payments": float(np.dot(state.prices, load) * h),
        "generation_cost": pricing.total_cost(gen, state.plan.g),
    }


def scenario_label(mode: str) -> str:
    return {"both": "rtp_v2g", "rtp-v2g": "rtp_v2g", "rtp-only": "rtp_only"}.get(mode, "baseline")


def _std(x: np.ndarray, axis=0) -> np.ndarray:
    """Sample standard deviation; zero when there is a single observation."""
    if x.shape[axis] < 2:
        return np.zeros(np.delete(x.shape, axis))
    return x.std(axis=axis, ddof=1)


@dataclass
class RunSummary:
    mode: str
    trials: int
    scenarios: dict  # label -> {"mean": {...}, "std": {...}}
    hourly: dict  # column name -> per-slot list
    convergence: dict
    checks: dict
    group_names: list = field(default_factory=list)


def _group_loads(state, s: Scenario) -> np.ndarray:
    """Household load summed per group, shape (groups, slots)."""
    owner = np.repeat(np.arange(len(s.groups)), [g.count for g in s.groups])
    return np.array([state.household_loads[owner == gi].sum(axis=0) for gi in range(len(s.groups))])


def _bev_load(result: TrialResult, state) -> np.ndarray:
    if not result.agents:
        return np.zeros(state.aggregate.size)
    pw = np.array([a.spec.rated_kw for a in result.agents])
    return (state.bev_actions * pw[:, None]).sum(axis=0)


def expected_energy(result: TrialResult, s: Scenario) -> float:
    """Household daily totals plus the net charging energy of every vehicle."""
    households = sum(g.count * g.daily_total for g in s.groups)
    vehicles = sum(a.t_req * a.spec.rated_kw for a in result.agents)
    return (households + vehicles) * s.grid.slot_hours


def soc_contract_ok(result: TrialResult, state) -> bool:
    for agent, sch in zip(result.agents, state.schedules):
        path = sch.soc_path
        full = agent.spec.battery_kwh
        if path.size and (path.min() < -1e-9 or path.max() > full + 1e-9 or abs(path[-1] - full) > 1e-9):
            return False
        if not path.size and abs(agent.soc_arrival - full) > 1e-9:
            return False
    return True


def aggregate_stats(results: list, s: Scenario) -> RunSummary:
    if not results:
        raise StackdrError("no trial results to summarise")
    results = sorted(results, key=lambda r: r.trial)
    mode = results[0].mode
    label = scenario_label(mode)
    states = {"baseline": [r.baseline for r in results]}
    if results[0].final is not None:
        states[label] = [r.final for r in results]

    scenarios = {}
    for name, sts in states.items():
        rows = [metrics(st, s.gen, s.grid) for st in sts]
        table = np.array([[row[k] for k in METRIC_KEYS] for row in rows])
        scenarios[name] = {
            "mean": dict(zip(METRIC_KEYS, table.mean(axis=0).tolist())),
            "std": dict(zip(METRIC_KEYS, _std(table).tolist())),
            "per_trial": {k: table[:, i].tolist() for i, k in enumerate(METRIC_KEYS)},
        }

    hourly = {}
    names = [g.name for g in s.groups]
    for name, sts in states.items():
        tag = "before" if name == "baseline" else "after"
        groups = np.array([_group_loads(st, s) for st in sts])
        for gi, gname in enumerate(names):
            hourly[f"{gname}_{tag}"] = groups[:, gi].mean(axis=0).tolist()
        hourly[f"bev_{tag}"] = np.mean([_bev_load(r, st) for r, st in zip(results, sts)], axis=0).tolist()
        hourly[f"aggregate_{tag}"] = np.mean([st.aggregate for st in sts], axis=0).tolist()
        g = np.array([st.plan.g for st in sts])
        hourly[f"generation_{tag}"] = g.mean(axis=0).tolist()
        hourly[f"generation_std_{tag}"] = _std(g).tolist()
        hourly[f"price_{tag}"] = np.mean([st.prices for st in sts], axis=0).tolist()

    converged = [r.trial for r in results if r.converged]
    convergence = {
        "trials": len(results),
        "converged": len(converged),
        "rate": len(converged) / len(results),
        "nonconverged_trials": [r.trial for r in results if not r.converged],
        "mean_rounds": float(np.mean([r.rounds for r in results])),
        "max_rounds_used": int(max(r.rounds for r in results)),
    }

    energy_gap = 0.0
    identity_gap = 0.0
    margin_violations = {name: [] for name in states}
    for i, r in enumerate(results):
        expected = expected_energy(r, s)
        for name in states:
            row = scenarios[name]["per_trial"]
            e = row["total_energy_kwh"][i]
            identity_gap = max(identity_gap, abs(e - expected) / max(expected, 1e-300))
            if not row["total_payments"][i] > row["generation_cost"][i]:
                margin_violations[name].append(r.trial)
        if label in states:
            eb = scenarios["baseline"]["per_trial"]["total_energy_kwh"][i]
            eo = scenarios[label]["per_trial"]["total_energy_kwh"][i]
            energy_gap = max(energy_gap, abs(eb - eo) / max(eb, 1e-300))

    checks = {
        "energy_rel_gap_baseline_vs_optimized": energy_gap,
        "energy_identity_rel_gap": identity_gap,
        "margin_violations": margin_violations,
        "max_user_energy_drift": max(r.max_energy_drift for r in results),
        "min_update_gain": min(r.min_update_gain for r in results),
        "soc_contract_ok": all(soc_contract_ok(r, st) for name in states
                               for r, st in zip(results, states[name])),
    }
    return RunSummary(mode=mode, trials=len(results), scenarios=scenarios, hourly=hourly,
                      convergence=convergence, checks=checks, group_names=names)


def _fmt(x) -> str:
    return f"{x:.6f}"


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, newline="")
    except OSError as exc:
        raise StackdrError(f"cannot write {path}: {exc.strerror}") from exc


def _csv_text(header: list, rows: list) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def summary_document(summary: RunSummary, s: Scenario) -> dict:
    table = {name: {k: v for k, v in sc["mean"].items()} for name, sc in summary.scenarios.items()}
    doc = {
        "schema": SUMMARY_SCHEMA,
        "mode": summary.mode,
        "trials": summary.trials,
        "seed": s.seed,
        "table": table,
        "table_std": {name: sc["std"] for name, sc in summary.scenarios.items()},
        "convergence": summary.convergence,
        "checks": summary.checks,
        "config": to_dict(s),
    }
    label = scenario_label(summary.mode)
    if label in table:
        base, opt = table["baseline"], table[label]
        doc["ratios"] = {
            k: (opt[k] / base[k] if base[k] else math.nan) for k in METRIC_KEYS
        }
    return doc


def emit_outputs(summary: RunSummary, s: Scenario, out_dir) -> list:
    """Write loads.csv, stats.csv and summary.json; returns the written paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StackdrError(f"cannot create output directory {out}: {exc.strerror}") from exc
    n = s.grid.slot_count
    hourly = summary.hourly
    tags = ["before"] + (["after"] if "aggregate_after" in hourly else [])

    cols = []
    for tag in tags:
        cols += [f"{g}_{tag}" for g in summary.group_names]
    for base in ("bev", "aggregate", "generation", "price"):
        cols += [f"{base}_{tag}" for tag in tags]
    rows = [[t, t + 1] + [_fmt(hourly[c][t]) for c in cols] for t in range(n)]
    loads = out / "loads.csv"
    _write(loads, _csv_text(["slot", "hour"] + cols, rows))

    key = tags[-1]
    stats_cols = ["g_mean", "g_std", "baseline_g_mean", "baseline_g_std"]
    rows = [[t, t + 1, _fmt(hourly[f"generation_{key}"][t]), _fmt(hourly[f"generation_std_{key}"][t]),
             _fmt(hourly["generation_before"][t]), _fmt(hourly["generation_std_before"][t])] for t in range(n)]
    stats = out / "stats.csv"
    _write(stats, _csv_text(["slot", "hour"] + stats_cols, rows))

    doc = summary_document(summary, s)
    summary_path = out / "summary.json"
    _write(summary_path, json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n")
    return [loads, stats, summary_path]
