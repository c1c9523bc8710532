"""Workload synthesis and ingestion.

Provides the tunable-heterogeneity microbenchmark, a curve corpus built
from parameter sweeps over standard mechanisms, a trace-to-DP mapping for
delimited cluster traces, a weighted two-category workload, and the
workload file format consumed by the simulator.

Demands are expressed relative to a reference block budget: a curve's
"min share" is its smallest per-alpha demand-to-capacity ratio, and its
best alpha the order attaining it.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .rdp import (
    DEFAULT_ALPHA_GRID,
    DpGuarantee,
    RdpCurve,
    block_capacity_curve,
    compose,
    gaussian_curve,
    laplace_curve,
    subsampled_gaussian_curve,
    subsampled_laplace_curve,
    validate_grid,
)

DEFAULT_BLOCK_BUDGET = DpGuarantee(10.0, 1e-7)
TARGET_BEST_ALPHAS = (3.0, 4.0, 5.0, 6.0, 8.0, 16.0, 32.0, 64.0)
OUTLIER_MIN_SHARE = 0.05


class GenerationError(RuntimeError):
    """Workload generation failed (e.g. an empty best-alpha bucket)."""


class CorpusError(RuntimeError):
    """The curve corpus cannot cover every target best alpha."""


class TraceIngestionError(ValueError):
    """A trace record is malformed."""


@dataclass(frozen=True)
class BlockRequest:
    """Which blocks a task wants: explicit ids or the newest `count`."""

    kind: str  # "ids" | "most_recent"
    ids: tuple[str, ...] = ()
    count: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("ids", "most_recent"):
            raise ValueError("kind must be 'ids' or 'most_recent'")
        if self.kind == "most_recent" and self.count < 1:
            raise ValueError("most_recent count must be >= 1")
        if self.kind == "ids" and not self.ids:
            raise ValueError("ids request must not be empty")


@dataclass(frozen=True)
class TaskSpec:
    """A workload-file task: demand curve applied to each requested block."""

    id: str
    arrival: int
    weight: float
    timeout: int | None
    blocks: BlockRequest
    demand: RdpCurve
    tag: str = ""


def min_capacity_share(curve: RdpCurve, capacity: RdpCurve,
                       ) -> tuple[float, float]:
    """(smallest demand-to-capacity ratio, alpha attaining it), over the
    orders with positive capacity; ties go to the smaller alpha."""
    c = capacity.as_array()
    d = curve.as_array()
    usable = np.nonzero(c > 0)[0]
    if len(usable) == 0:
        raise ValueError("capacity curve has no usable alpha order")
    ratios = d[usable] / c[usable]
    k = int(np.argmin(ratios))
    return float(ratios[k]), float(curve.alphas[usable[k]])


def rescale_to_share(curve: RdpCurve, capacity: RdpCurve,
                     target_share: float) -> RdpCurve:
    """Multiplicatively rescale `curve` so its min capacity share equals
    `target_share`; the arg-min alpha is preserved exactly."""
    share, _ = min_capacity_share(curve, capacity)
    if share <= 0:
        raise ValueError("cannot rescale an all-zero curve")
    return curve.scaled(target_share / share)


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    curve: RdpCurve
    best_alpha: float
    min_share: float


@dataclass(frozen=True)
class CurveCorpus:
    entries: tuple[CorpusEntry, ...]
    grid: tuple[float, ...]
    capacity: RdpCurve

    def bucket(self, alpha: float) -> tuple[CorpusEntry, ...]:
        return tuple(e for e in self.entries if e.best_alpha == alpha)

    @property
    def buckets(self) -> dict[float, tuple[CorpusEntry, ...]]:
        return {a: self.bucket(a) for a in TARGET_BEST_ALPHAS}


def _corpus_candidates(grid) -> Iterable[tuple[str, RdpCurve]]:
    for sigma in np.geomspace(0.3, 40.0, 120):
        yield f"gaussian(s={sigma:.4g})", gaussian_curve(sigma, grid)
    for scale in np.geomspace(0.02, 60.0, 240):
        yield f"laplace(b={scale:.4g})", laplace_curve(scale, grid)
    for q in (0.001, 0.005, 0.02, 0.05, 0.1, 0.2, 0.3, 0.6):
        for sigma in np.geomspace(0.4, 12.0, 22):
            yield (f"subsampled_gaussian(s={sigma:.4g},q={q})",
                   subsampled_gaussian_curve(sigma, q, 1, grid))
        for scale in np.geomspace(0.03, 20.0, 22):
            yield (f"subsampled_laplace(b={scale:.4g},q={q})",
                   subsampled_laplace_curve(scale, q, 1, grid))
    for scale in np.geomspace(0.05, 20.0, 16):
        for sigma in np.geomspace(0.5, 20.0, 16):
            yield (f"laplace+gaussian(b={scale:.4g},s={sigma:.4g})",
                   compose([laplace_curve(scale, grid),
                            gaussian_curve(sigma, grid)]))


def build_curve_corpus(grid: Sequence[float] = DEFAULT_ALPHA_GRID,
                       budget: DpGuarantee = DEFAULT_BLOCK_BUDGET,
                       drop_share_below: float = OUTLIER_MIN_SHARE,
                       ) -> CurveCorpus:
    """Sweep mechanism parameters into a corpus of demand curves covering
    every target best alpha.

    Curves are normalised against the block capacity from `budget`;
    outliers with min share below `drop_share_below` are dropped, and
    exact duplicates (e.g. q = 1 subsampled entries) are deduplicated.
    """
    grid = validate_grid(grid)
    capacity = block_capacity_curve(budget, grid)
    seen: set[tuple[float, ...]] = set()
    entries: list[CorpusEntry] = []
    for name, curve in _corpus_candidates(grid):
        key = tuple(round(e, 12) for e in curve.eps)
        if key in seen:
            continue
        seen.add(key)
        share, best = min_capacity_share(curve, capacity)
        if share < drop_share_below:
            continue
        entries.append(CorpusEntry(name, curve, best, share))
    corpus = CurveCorpus(tuple(entries), grid, capacity)
    missing = [a for a in TARGET_BEST_ALPHAS if not corpus.bucket(a)]
    if missing:
        raise CorpusError(f"no sweep point has best alpha in {missing}")
    return corpus


@lru_cache(maxsize=4)
def default_corpus(grid: tuple[float, ...] = DEFAULT_ALPHA_GRID) -> CurveCorpus:
    return build_curve_corpus(grid)


@dataclass(frozen=True)
class MicrobenchKnobs:
    """Heterogeneity knobs for the synthetic microbenchmark."""

    n_tasks: int
    n_blocks: int
    mu_blocks: int = 10
    sigma_blocks: float = 0.0
    sigma_alpha: float = 0.0
    eps_min: float = 0.1  # target min capacity share per curve
    weight: float = 1.0
    arrival: int = 0
    timeout: int | None = None

    def __post_init__(self) -> None:
        if self.n_tasks < 0 or self.n_blocks < 1 or self.mu_blocks < 1:
            raise ValueError("counts must be positive")
        if self.sigma_blocks < 0 or self.sigma_alpha < 0:
            raise ValueError("knob stdevs must be >= 0")
        if self.eps_min <= 0:
            raise ValueError("eps_min must be > 0")


def _truncated_discrete_gaussian(rng: np.random.Generator, mu: float,
                                 sigma: float, lo: int, hi: int) -> int:
    """Round-and-reject sampling of a truncated discrete Gaussian."""
    if sigma == 0:
        return int(min(max(round(mu), lo), hi))
    for _ in range(10_000):
        v = int(round(rng.normal(mu, sigma)))
        if lo <= v <= hi:
            return v
    return int(min(max(round(mu), lo), hi))


def block_id(index: int) -> str:
    return f"b{index}"


def generate_microbenchmark(knobs: MicrobenchKnobs, seed: int,
                            corpus: CurveCorpus | None = None,
                            ) -> list[TaskSpec]:
    """Synthesize tasks with tunable heterogeneity in requested-block
    counts (sigma_blocks) and best alphas (sigma_alpha).

    Block counts follow a truncated discrete Gaussian around mu_blocks;
    best-alpha buckets follow one centred on the alpha = 5 bucket. Every
    sampled curve is rescaled so its min capacity share is eps_min.
    """
    corpus = corpus or default_corpus()
    rng = np.random.default_rng(seed)
    center = TARGET_BEST_ALPHAS.index(5.0)
    tasks: list[TaskSpec] = []
    for i in range(knobs.n_tasks):
        k = _truncated_discrete_gaussian(
            rng, knobs.mu_blocks, knobs.sigma_blocks, 1, knobs.n_blocks)
        ids = tuple(sorted(
            block_id(j) for j in
            rng.choice(knobs.n_blocks, size=k, replace=False)))
        idx = _truncated_discrete_gaussian(
            rng, center, knobs.sigma_alpha, 0, len(TARGET_BEST_ALPHAS) - 1)
        target_alpha = TARGET_BEST_ALPHAS[idx]
        bucket = corpus.bucket(target_alpha)
        if not bucket:
            raise GenerationError(
                f"best-alpha bucket {target_alpha} is empty")
        curve = None
        for _ in range(50):
            entry = bucket[int(rng.integers(len(bucket)))]
            scaled = rescale_to_share(entry.curve, corpus.capacity,
                                      knobs.eps_min)
            share, best = min_capacity_share(scaled, corpus.capacity)
            if (abs(share - knobs.eps_min) <= 1e-6
                    and best == target_alpha):
                curve = scaled
                tag = entry.name
                break
        if curve is None:
            raise GenerationError(
                f"no curve in bucket {target_alpha} survives rescaling")
        tasks.append(TaskSpec(
            id=f"t{i}", arrival=knobs.arrival, weight=knobs.weight,
            timeout=knobs.timeout, blocks=BlockRequest("ids", ids=ids),
            demand=curve, tag=tag))
    return tasks


@dataclass(frozen=True)
class TraceMappingParams:
    """Affine maps from trace metrics to DP parameters."""

    eps_slope: float = 0.002      # per memory GB-hour
    eps_intercept: float = 0.001
    blocks_slope: float = 2e-9    # per network byte
    blocks_intercept: float = 0.0
    max_blocks: int = 100
    eps_bounds: tuple[float, float] = (0.001, 1.0)
    arrival_scale: float = 3600.0  # trace time units per simulator tick
    timeout: int | None = 50
    cpu_menu: tuple[str, ...] = ("laplace", "gaussian", "subsampled_laplace")
    gpu_menu: tuple[str, ...] = ("composed_subsampled_gaussians",
                                 "composed_gaussians")

    def __post_init__(self) -> None:
        if self.eps_slope <= 0 or self.blocks_slope <= 0:
            raise ValueError("affine slopes must be > 0")
        lo, hi = self.eps_bounds
        if not (0 < lo < hi):
            raise ValueError("eps bounds must satisfy 0 < lo < hi")


_TRACE_FIELDS = ("timestamp", "machine_class", "memory_gb_hours",
                 "network_bytes")


def read_trace_csv(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _mechanism_curve(kind: str, rng: np.random.Generator,
                     grid: tuple[float, ...]) -> RdpCurve:
    if kind == "laplace":
        return laplace_curve(float(rng.uniform(0.1, 10.0)), grid)
    if kind == "gaussian":
        return gaussian_curve(float(rng.uniform(0.5, 20.0)), grid)
    if kind == "subsampled_laplace":
        return subsampled_laplace_curve(
            float(rng.uniform(0.2, 10.0)),
            float(rng.choice([0.01, 0.05, 0.1, 0.3])), 1, grid)
    if kind == "subsampled_gaussian":
        return subsampled_gaussian_curve(
            float(rng.uniform(0.5, 10.0)),
            float(rng.choice([0.001, 0.01, 0.1])), 1, grid)
    if kind == "composed_subsampled_gaussians":
        parts = [_mechanism_curve("subsampled_gaussian", rng, grid)
                 for _ in range(int(rng.integers(2, 5)))]
        return compose(parts)
    if kind == "composed_gaussians":
        parts = [_mechanism_curve("gaussian", rng, grid)
                 for _ in range(int(rng.integers(2, 5)))]
        return compose(parts)
    raise ValueError(f"unknown mechanism kind {kind!r}")


def map_trace(records: Sequence[dict], params: TraceMappingParams, seed: int,
              grid: Sequence[float] = DEFAULT_ALPHA_GRID,
              budget: DpGuarantee = DEFAULT_BLOCK_BUDGET) -> list[TaskSpec]:
    """Map trace records {timestamp, machine_class, memory_gb_hours,
    network_bytes} to DP tasks.

    Epsilon demand comes from the memory affine map, block count from the
    network affine map; records outside the truncation bounds are dropped.
    Tasks request the most recent blocks with weight 1.
    """
    grid = validate_grid(grid)
    rng = np.random.default_rng(seed)
    capacity = block_capacity_curve(budget, grid)
    for i, rec in enumerate(records):
        missing = [f for f in _TRACE_FIELDS if f not in rec or rec[f] in ("", None)]
        if missing:
            raise TraceIngestionError(
                f"record {i} missing field(s) {missing}")
    timestamps = [float(r["timestamp"]) for r in records]
    t0 = min(timestamps) if timestamps else 0.0
    lo, hi = params.eps_bounds
    tasks: list[TaskSpec] = []
    for i, rec in enumerate(records):
        cls = str(rec["machine_class"]).lower()
        if cls not in ("cpu", "gpu"):
            raise TraceIngestionError(
                f"record {i}: machine_class must be cpu or gpu, got {cls!r}")
        eps = params.eps_slope * float(rec["memory_gb_hours"]) \
            + params.eps_intercept
        n_blocks = max(1, math.floor(
            params.blocks_slope * float(rec["network_bytes"])
            + params.blocks_intercept))
        if n_blocks > params.max_blocks or not (lo <= eps <= hi):
            continue
        menu = params.cpu_menu if cls == "cpu" else params.gpu_menu
        kind = str(menu[int(rng.integers(len(menu)))])
        curve = rescale_to_share(_mechanism_curve(kind, rng, grid),
                                 capacity, eps)
        arrival = int((float(rec["timestamp"]) - t0) / params.arrival_scale)
        tasks.append(TaskSpec(
            id=f"tr{i}", arrival=arrival, weight=1.0, timeout=params.timeout,
            blocks=BlockRequest("most_recent", count=n_blocks),
            demand=curve, tag=kind))
    tasks.sort(key=lambda t: (t.arrival, t.id))
    return tasks


@dataclass(frozen=True)
class WeightedWorkloadParams:
    """Two-category weighted workload: heavy model-training tasks and
    light statistics tasks, arriving by a Poisson process."""

    n_tasks: int = 100
    arrival_rate: float = 2.0  # tasks per tick; 0 -> empty workload
    n_large_templates: int = 24
    n_small_templates: int = 18
    large_weights: tuple[float, ...] = (10.0, 50.0, 100.0, 500.0)
    small_weights: tuple[float, ...] = (1.0, 5.0, 10.0, 50.0)
    max_blocks: int = 50
    timeout: int | None = 50


def generate_weighted_two_category(params: WeightedWorkloadParams, seed: int,
                                   grid: Sequence[float] = DEFAULT_ALPHA_GRID,
                                   budget: DpGuarantee = DEFAULT_BLOCK_BUDGET,
                                   ) -> list[TaskSpec]:
    """Heavy tasks use compositions of subsampled Gaussians with weights
    from the large grid; light tasks use Laplace statistics with weights
    from the small grid. All tasks request the latest blocks."""
    grid = validate_grid(grid)
    if params.arrival_rate <= 0 or params.n_tasks == 0:
        return []
    rng = np.random.default_rng(seed)
    capacity = block_capacity_curve(budget, grid)

    def make_template(large: bool) -> dict:
        if large:
            curve = _mechanism_curve("composed_subsampled_gaussians", rng, grid)
            blocks = int(min(1 + rng.geometric(0.25), params.max_blocks))
            share = float(rng.uniform(0.02, 0.2))
        else:
            curve = _mechanism_curve("laplace", rng, grid)
            blocks = int(min(1 + rng.geometric(0.7), params.max_blocks))
            share = float(rng.uniform(0.002, 0.05))
        return {"curve": rescale_to_share(curve, capacity, share),
                "blocks": blocks, "large": large}

    templates = ([make_template(True) for _ in range(params.n_large_templates)]
                 + [make_template(False)
                    for _ in range(params.n_small_templates)])
    tasks: list[TaskSpec] = []
    t = 0.0
    for i in range(params.n_tasks):
        t += rng.exponential(1.0 / params.arrival_rate)
        tpl = templates[int(rng.integers(len(templates)))]
        grid_w = (params.large_weights if tpl["large"]
                  else params.small_weights)
        weight = float(grid_w[int(rng.integers(len(grid_w)))])
        tasks.append(TaskSpec(
            id=f"w{i}", arrival=int(t), weight=weight,
            timeout=params.timeout,
            blocks=BlockRequest("most_recent", count=tpl["blocks"]),
            demand=tpl["curve"],
            tag="large" if tpl["large"] else "small"))
    return tasks


def save_workload(path: str, tasks: Sequence[TaskSpec],
                  grid: Sequence[float] = DEFAULT_ALPHA_GRID) -> None:
    grid = validate_grid(grid)
    records = []
    for t in tasks:
        blocks = ({"most_recent": t.blocks.count}
                  if t.blocks.kind == "most_recent"
                  else {"ids": list(t.blocks.ids)})
        records.append({
            "id": t.id, "arrival": t.arrival, "weight": t.weight,
            "timeout": t.timeout, "blocks": blocks,
            "demand": {"alphas": list(t.demand.alphas),
                       "eps": list(t.demand.eps)},
            "tag": t.tag,
        })
    with open(path, "w") as fh:
        json.dump({"grid": list(grid), "tasks": records}, fh, indent=1)


def load_workload(path: str) -> tuple[tuple[float, ...], list[TaskSpec]]:
    with open(path) as fh:
        doc = json.load(fh)
    grid = validate_grid(doc["grid"])
    tasks = []
    for rec in doc["tasks"]:
        blocks = rec["blocks"]
        if "most_recent" in blocks:
            req = BlockRequest("most_recent", count=int(blocks["most_recent"]))
        else:
            req = BlockRequest("ids", ids=tuple(blocks["ids"]))
        demand = RdpCurve(tuple(rec["demand"]["alphas"]),
                          tuple(rec["demand"]["eps"]))
        if demand.alphas != grid:
            raise ValueError(
                f"task {rec['id']}: demand grid does not match workload grid")
        tasks.append(TaskSpec(
            id=rec["id"], arrival=int(rec["arrival"]),
            weight=float(rec["weight"]),
            timeout=None if rec["timeout"] is None else int(rec["timeout"]),
            blocks=req, demand=demand, tag=rec.get("tag", "")))
    return grid, tasks
