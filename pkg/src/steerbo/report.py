"""Render a run report from a trial log: figures plus a flat CSV.

Produces incumbent curves (per iteration and per cumulative cost), the
knowledge gate-probability trace, and per-hyperparameter sampling-variance
series, written as PNG files next to a summary.csv.
"""
from __future__ import annotations

import csv
import os
from typing import Any

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .trial_log import read_log


def render_report(log_path: str, out_dir: str) -> list[str]:
    """Write report files for a finished (or in-progress) run log.

    Returns the paths written.  Knowledge events appear as vertical
    markers; trials that used knowledge are highlighted on the incumbent
    curve.
    """
    records = list(read_log(log_path))
    trials = [r for r in records if r.get("type") == "trial" and not r.get("failed")]
    events = [r for r in records if r.get("type") == "knowledge"]
    header = next((r for r in records if r.get("type") == "run"), {})
    if not trials:
        raise ValueError(f"{log_path}: no successful trials to report")
    os.makedirs(out_dir, exist_ok=True)

    iterations = [t["iteration"] for t in trials]
    incumbent = [t["incumbent_score"] for t in trials]
    scores = [t["score"] for t in trials]
    cost = [t["cumulative_cost"] for t in trials]
    used = [t["used_knowledge"] for t in trials]
    written = []

    def save(fig: plt.Figure, name: str) -> None:
        path = os.path.join(out_dir, name)
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    # incumbent vs iteration
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(iterations, incumbent, drawstyle="steps-post", label="incumbent")
    ax.plot(iterations, scores, ".", markersize=3, alpha=0.4, label="trial score")
    used_it = [i for i, u in zip(iterations, used) if u]
    if used_it:
        ax.plot(used_it, [s for s, u in zip(scores, used) if u], "o", markersize=4,
                color="tab:orange", label="used knowledge")
    for ev in events:
        ax.axvline(ev["iteration"], color="tab:red", linestyle=":", alpha=0.7)
    ax.set_xlabel("iteration")
    ax.set_ylabel("score")
    ax.legend(loc="lower right", fontsize=8)
    ax.set_title("incumbent score")
    save(fig, "incumbent_vs_iteration.png")

    # incumbent vs cumulative cost
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(cost, incumbent, drawstyle="steps-post")
    ax.set_xlabel("cumulative cost (s)")
    ax.set_ylabel("incumbent score")
    ax.set_title("incumbent vs cost")
    save(fig, "incumbent_vs_cost.png")

    # gate probability trace
    gamma = header.get("params", {}).get("gamma")
    if gamma is not None and events:
        rho = header.get("params", {}).get("rho_init", 1.0)
        fig, ax = plt.subplots(figsize=(7, 3))
        probs = _gate_trace(iterations, events, gamma, rho)
        ax.plot(iterations, probs)
        ax.set_ylim(-0.02, 1.02)
        ax.set_xlabel("iteration")
        ax.set_ylabel("gate probability")
        ax.set_title("knowledge gate probability")
        save(fig, "gate_probability.png")

    # sampling variance per hyperparameter
    var_rows = [(t["iteration"], t["sampling_variance"]) for t in trials
                if t.get("sampling_variance")]
    if var_rows:
        names = sorted(var_rows[0][1])
        fig, axes = plt.subplots(len(names), 1, figsize=(7, 1.8 * len(names)),
                                 sharex=True, squeeze=False)
        for ax, name in zip(axes[:, 0], names):
            ax.plot([it for it, _ in var_rows], [v[name] for _, v in var_rows],
                    linewidth=0.9)
            ax.set_ylabel(name, fontsize=8)
        axes[-1, 0].set_xlabel("iteration")
        axes[0, 0].set_title("sampling variance per hyperparameter")
        save(fig, "sampling_variance.png")

    # delimited summary
    csv_path = os.path.join(out_dir, "summary.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "score", "incumbent_score", "cumulative_cost",
                         "used_knowledge", "refit"])
        for t in trials:
            writer.writerow([t["iteration"], t["score"], t["incumbent_score"],
                             t["cumulative_cost"], int(t["used_knowledge"]),
                             int(t["refit"])])
    written.append(csv_path)
    return written


def _gate_trace(iterations: list[int], events: list[dict[str, Any]],
                gamma: float, rho: float) -> list[float]:
    """Gate probability per iteration implied by the logged knowledge events."""
    probs = []
    for it in iterations:
        active: dict[str, Any] | None = None
        for ev in events:
            if ev["iteration"] <= it:
                active = ev
        if active is None or active.get("cleared"):
            probs.append(0.0)
        else:
            probs.append(min(max(gamma ** (it - active["iteration"]) * rho, 0.0), 1.0))
    return probs
