"""Figure rendering and human-readable result summaries.

Figures are written as PNG files next to the delimited output; rendering
uses the non-interactive Agg backend so it works headless.
"""
from __future__ import annotations

import csv
import json
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def render_run_figures(rows, outdir: str) -> list[str]:
    """Bar charts of mean allocated tasks and weight per scheduler."""
    by_sched: dict[str, list] = defaultdict(list)
    for r in rows:
        if r.status == "ok":
            by_sched[r.scheduler].append(r)
    names = sorted(by_sched)
    written: list[str] = []
    for metric, fname, label in (
        ("allocated_count", "allocated_tasks.png", "mean allocated tasks"),
        ("allocated_weight", "allocated_weight.png", "mean allocated weight"),
    ):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        values = [
            sum(getattr(r, metric) for r in by_sched[n]) / len(by_sched[n])
            for n in names
        ]
        ax.bar(names, values, color="#4878cf")
        ax.set_ylabel(label)
        ax.set_xlabel("scheduler")
        fig.tight_layout()
        path = os.path.join(outdir, fname)
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def render_sweep_figure(sweep_csv: str, out_path: str) -> str:
    """Line plot of mean allocated tasks versus the swept value, one line
    per scheduler."""
    series: dict[str, dict[float, list[float]]] = defaultdict(
        lambda: defaultdict(list))
    parameter = "value"
    with open(sweep_csv, newline="") as fh:
        for rec in csv.DictReader(fh):
            if rec["status"] != "ok":
                continue
            parameter = rec["parameter"]
            series[rec["scheduler"]][float(rec["value"])].append(
                float(rec["allocated_count"]))
    fig, ax = plt.subplots(figsize=(5, 3.2))
    for name in sorted(series):
        points = sorted(series[name].items())
        xs = [v for v, _ in points]
        ys = [sum(ns) / len(ns) for _, ns in points]
        ax.plot(xs, ys, marker="o", label=name)
    ax.set_xlabel(parameter)
    ax.set_ylabel("mean allocated tasks")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def describe_result(result_dir: str) -> str:
    """Plain-text digest of a result directory (summary plus per-scheduler
    aggregates from results.csv)."""
    lines: list[str] = []
    summary_path = os.path.join(result_dir, "summary.json")
    if os.path.exists(summary_path):
        with open(summary_path) as fh:
            summary = json.load(fh)
        lines.append(f"config hash: {summary['config_hash']}")
        lines.append(f"version:     {summary['version']}")
        lines.append(f"rows:        {summary['rows']}")
    results_path = os.path.join(result_dir, "results.csv")
    if not os.path.exists(results_path):
        if not lines:
            raise FileNotFoundError(
                f"{result_dir}: no results.csv or summary.json found")
        return "\n".join(lines)
    agg: dict[str, list[dict]] = defaultdict(list)
    with open(results_path, newline="") as fh:
        for rec in csv.DictReader(fh):
            agg[rec["scheduler"]].append(rec)
    lines.append("")
    lines.append(f"{'scheduler':<10} {'runs':>4} {'ok':>3} "
                 f"{'mean tasks':>10} {'mean weight':>11}")
    for name in sorted(agg):
        recs = agg[name]
        ok = [r for r in recs if r["status"] == "ok"]
        mean_n = (sum(float(r["allocated_count"]) for r in ok) / len(ok)
                  if ok else 0.0)
        mean_w = (sum(float(r["allocated_weight"]) for r in ok) / len(ok)
                  if ok else 0.0)
        lines.append(f"{name:<10} {len(recs):>4} {len(ok):>3} "
                     f"{mean_n:>10.2f} {mean_w:>11.2f}")
    figures = sorted(f for f in os.listdir(result_dir) if f.endswith(".png"))
    if figures:
        lines.append("")
        lines.append("figures: " + ", ".join(figures))
    return "\n".join(lines)
