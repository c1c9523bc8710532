"""Experiment execution and result emission.

Runs every (scheduler x seed) cell of a configuration, writes the result
table and a machine-readable summary, and renders figures next to the
delimited output. Result files are written atomically (tempfile + rename)
and `results.csv` is byte-stable across reruns of the same config; wall-
clock scheduler runtimes go to a separate `runtimes.csv`.
"""
from __future__ import annotations

import copy
import hashlib
import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import __version__
from .config import ConfigError, ExperimentConfig
from .knapsack import IntractableInstanceError
from .schedulers import make_scheduler
from .simulator import BlockStreamSpec, run_offline, run_online
from .workload import (
    MicrobenchKnobs,
    TraceMappingParams,
    WeightedWorkloadParams,
    generate_microbenchmark,
    generate_weighted_two_category,
    load_workload,
    map_trace,
    read_trace_csv,
)

SWEEPABLE = ("task_count", "block_count", "T", "sigma_blocks", "sigma_alpha")


@dataclass
class ResultRow:
    scheduler: str
    workload: str
    seed: int
    status: str  # ok | skipped
    allocated_count: int
    allocated_weight: float
    delay_mean: float
    delay_median: float
    delay_p95: float
    fair_share_fraction: float
    runtime_seconds: float

    RESULT_FIELDS = ("scheduler", "workload", "seed", "status",
                     "allocated_count", "allocated_weight", "delay_mean",
                     "delay_median", "delay_p95", "fair_share_fraction")

    def result_values(self) -> list[str]:
        # locale-independent decimal formatting; runtime excluded so the
        # table is deterministic
        out = []
        for f in self.RESULT_FIELDS:
            v = getattr(self, f)
            out.append(f"{v:.10g}" if isinstance(v, float) else str(v))
        return out


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file in the target directory plus rename, so a
    crashed run never leaves a partial file under the final name."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_workload(cfg: ExperimentConfig, seed: int):
    """Materialise the configured workload for one seed.

    Returns (workload name, list of TaskSpec)."""
    wl = cfg.workload
    if "file" in wl:
        grid, tasks = load_workload(wl["file"])
        if grid != cfg.grid:
            raise ConfigError("workload file grid does not match config grid")
        return os.path.basename(wl["file"]), tasks
    gen = wl["generator"]
    params = dict(wl.get("params", {}))
    if gen == "microbenchmark":
        knobs = MicrobenchKnobs(**params)
        return "microbenchmark", generate_microbenchmark(knobs, seed)
    if gen == "weighted_two_category":
        return ("weighted_two_category",
                generate_weighted_two_category(
                    WeightedWorkloadParams(**params), seed, grid=cfg.grid))
    if gen == "trace":
        trace_file = params.pop("file")
        records = read_trace_csv(trace_file)
        return ("trace",
                map_trace(records, TraceMappingParams(**params), seed,
                          grid=cfg.grid))
    raise ConfigError(f"workload.generator: unknown generator {gen!r}")


def _block_stream(cfg: ExperimentConfig) -> BlockStreamSpec:
    b = cfg.blocks
    return BlockStreamSpec(
        initial=int(b.get("initial", 1)),
        arrival_per_tick=int(b.get("arrival_per_tick", 1)),
        max_blocks=b.get("max_blocks"),
        epsilon=float(b.get("epsilon", 10.0)),
        delta=float(b.get("delta", 1e-7)),
        unlock_steps=int(b.get("unlock_steps", 1)),
    )


def run_cell(cfg: ExperimentConfig, sched_spec: dict, seed: int) -> ResultRow:
    """Execute one (scheduler, seed) cell of the experiment."""
    params = {k: v for k, v in sched_spec.items() if k != "name"}
    scheduler = make_scheduler(sched_spec["name"], **params)
    name, tasks = build_workload(cfg, seed)
    try:
        if cfg.mode == "online":
            result = run_online(tasks, _block_stream(cfg), scheduler,
                                cfg.batch_period, grid=cfg.grid,
                                horizon=cfg.horizon, n_share=cfg.n_share)
        else:
            stream = _block_stream(cfg)
            result = run_offline(tasks, stream.initial, scheduler,
                                 grid=cfg.grid, epsilon=stream.epsilon,
                                 delta=stream.delta, n_share=cfg.n_share)
    except IntractableInstanceError:
        return ResultRow(scheduler.name, name, seed, "skipped",
                         0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    mean, median, p95 = result.report.delay_stats()
    return ResultRow(
        scheduler=scheduler.name, workload=name, seed=seed, status="ok",
        allocated_count=result.report.allocated_count,
        allocated_weight=result.report.allocated_weight,
        delay_mean=mean, delay_median=median, delay_p95=p95,
        fair_share_fraction=result.report.fair_share_fraction,
        runtime_seconds=result.report.runtime_seconds,
    )


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(cfg.to_yaml().encode()).hexdigest()[:16]


def run_experiment(cfg: ExperimentConfig, output_dir: str | None = None,
                   figures: bool = True) -> list[ResultRow]:
    """Run all (scheduler x seed) cells; write results.csv, runtimes.csv,
    summary.json and figures into the output directory."""
    outdir = output_dir or cfg.output_dir
    os.makedirs(outdir, exist_ok=True)
    cells = [(s, seed) for s in cfg.schedulers for seed in cfg.seeds]
    if cfg.parallelism > 1:
        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            rows = list(pool.map(lambda c: run_cell(cfg, *c), cells))
    else:
        rows = [run_cell(cfg, s, seed) for s, seed in cells]
    rows.sort(key=lambda r: (r.scheduler, r.seed))  # order-independent merge

    header = ",".join(ResultRow.RESULT_FIELDS)
    lines = [header] + [",".join(r.result_values()) for r in rows]
    atomic_write_text(os.path.join(outdir, "results.csv"),
                      "\n".join(lines) + "\n")
    rt_lines = ["scheduler,seed,runtime_seconds"] + [
        f"{r.scheduler},{r.seed},{r.runtime_seconds:.6f}" for r in rows]
    atomic_write_text(os.path.join(outdir, "runtimes.csv"),
                      "\n".join(rt_lines) + "\n")
    summary = {
        "config_hash": config_hash(cfg),
        "version": __version__,
        "rows": len(rows),
        "schedulers": sorted({r.scheduler for r in rows}),
        "seeds": cfg.seeds,
        "files": ["results.csv", "runtimes.csv"],
    }
    atomic_write_text(os.path.join(outdir, "summary.json"),
                      json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if figures:
        from .reporting import render_run_figures
        render_run_figures(rows, outdir)
    if any(r.status not in ("ok", "skipped") for r in rows):
        raise RuntimeError("experiment cell failed")
    return rows


def _apply_sweep_value(raw: dict, parameter: str, value):
    doc = copy.deepcopy(raw)
    wl = doc.get("workload", {})
    gen = wl.get("generator")
    params = wl.setdefault("params", {}) if gen else None
    if parameter == "T":
        if doc.get("mode") != "online":
            raise ConfigError("batch_period sweep requires online mode")
        doc["batch_period"] = value
    elif parameter == "block_count":
        blocks = doc.setdefault("blocks", {})
        blocks["initial"] = int(value)
        if blocks.get("max_blocks") is not None:
            blocks["max_blocks"] = max(int(value),
                                       int(blocks["max_blocks"]))
    elif parameter == "task_count":
        if gen not in ("microbenchmark", "weighted_two_category"):
            raise ConfigError(
                f"task_count sweep not applicable to workload {gen!r}")
        params["n_tasks"] = int(value)
    elif parameter in ("sigma_blocks", "sigma_alpha"):
        if gen != "microbenchmark":
            raise ConfigError(
                f"{parameter} sweep requires the microbenchmark generator")
        params[parameter] = float(value)
    else:
        raise ConfigError(
            f"sweep parameter must be one of {SWEEPABLE}, got {parameter!r}")
    return doc


def sweep(cfg: ExperimentConfig, parameter: str, values,
          output_dir: str | None = None, figures: bool = True) -> str:
    """One run_experiment per value; emits per-value subdirectories plus a
    combined long-format table (sweep.csv) and a figure."""
    from .config import validate_config

    outdir = output_dir or cfg.output_dir
    os.makedirs(outdir, exist_ok=True)
    long_rows: list[tuple] = []
    for value in values:
        sub_cfg = validate_config(_apply_sweep_value(cfg.raw, parameter,
                                                     value))
        subdir = os.path.join(outdir, f"{parameter}_{value}")
        rows = run_experiment(sub_cfg, subdir, figures=False)
        for r in rows:
            long_rows.append((parameter, value, *r.result_values()))
    header = "parameter,value," + ",".join(ResultRow.RESULT_FIELDS)
    lines = [header] + [",".join(str(x) for x in row) for row in long_rows]
    path = os.path.join(outdir, "sweep.csv")
    atomic_write_text(path, "\n".join(lines) + "\n")
    if figures:
        from .reporting import render_sweep_figure
        render_sweep_figure(path, os.path.join(outdir, "sweep_allocated.png"))
    return path
