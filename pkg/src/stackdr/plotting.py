"""Figures rendered next to the CSV outputs (``simulate --figures``)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update({
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
    "figure.dpi": 120,
})

_META = {"Software": None}


def _hours(n):
    return np.arange(1, n + 1)


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path


def group_loads(summary, out: Path) -> Path:
    hourly = summary.hourly
    names = summary.group_names
    fig, axes = plt.subplots(1, len(names) + 1, figsize=(3.2 * (len(names) + 1), 3.0), sharex=True)
    hours = _hours(len(hourly["aggregate_before"]))
    for ax, name in zip(axes, names):
        ax.plot(hours, hourly[f"{name}_before"], "k--", label="before")
        if f"{name}_after" in hourly:
            ax.plot(hours, hourly[f"{name}_after"], "C0-", label="after")
        ax.set_title(name)
        ax.set_xlabel("hour")
    axes[0].set_ylabel("kW")
    ax = axes[-1]
    ax.plot(hours, hourly["bev_before"], "k--", label="before")
    if "bev_after" in hourly:
        ax.plot(hours, hourly["bev_after"], "C3-", label="after")
    ax.axhline(0, color="0.5", lw=0.8)
    ax.set_title("BEV fleet")
    ax.set_xlabel("hour")
    axes[0].legend()
    return _save(fig, out / "loads.png")


def generation(summary, out: Path) -> Path:
    hourly = summary.hourly
    key = "after" if "generation_after" in hourly else "before"
    hours = _hours(len(hourly["generation_before"]))
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.0, 5.0), sharex=True)
    ax1.plot(hours, hourly["generation_before"], "k--", label="baseline")
    if key == "after":
        mean, std = np.array(hourly["generation_after"]), np.array(hourly["generation_std_after"])
        ax1.plot(hours, mean, "C0-", label="optimized")
        ax1.fill_between(hours, mean - std, mean + std, color="C0", alpha=0.25, lw=0)
    ax1.set_ylabel("generation [kW]")
    ax1.legend()
    ax2.bar(hours, hourly[f"generation_std_{key}"], color="C1")
    ax2.set_ylabel("std across trials [kW]")
    ax2.set_xlabel("hour")
    return _save(fig, out / "generation.png")


def prices(summary, out: Path) -> Path:
    hourly = summary.hourly
    hours = _hours(len(hourly["price_before"]))
    fig, ax = plt.subplots(figsize=(6.0, 3.0))
    ax.step(hours, hourly["price_before"], "k--", where="mid", label="conventional")
    if "price_after" in hourly:
        ax.step(hours, hourly["price_after"], "C2-", where="mid", label="real-time")
    ax.set_xlabel("hour")
    ax.set_ylabel("price [money/kWh]")
    ax.legend()
    return _save(fig, out / "prices.png")


def render_all(summary, out_dir) -> list[Path]:
    out = Path(out_dir)
    return [group_loads(summary, out), generation(summary, out), prices(summary, out)]
