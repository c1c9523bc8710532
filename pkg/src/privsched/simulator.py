"""Deterministic discrete-event simulation of online privacy scheduling.

One simulator tick is the block inter-arrival period. Each tick admits
arriving blocks and tasks, evicts timed-out tasks, and at every batch
boundary runs the configured scheduler against the unlocked budget.
The event loop is single-threaded; replaying a (config, seed) pair gives
an identical report.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .blocks import Block, check_filter_safety, unlocked_capacity
from .rdp import DEFAULT_ALPHA_GRID, DpGuarantee, block_capacity_curve, validate_grid
from .schedulers import Scheduler, ScheduleOutcome, Task, fair_share_fraction
from .workload import TaskSpec, block_id


class ConfigValidationError(ValueError):
    """Simulation parameters are inconsistent."""


@dataclass(frozen=True)
class BlockStreamSpec:
    """How blocks enter the system and what budget each one carries."""

    initial: int = 1
    arrival_per_tick: int = 1
    max_blocks: int | None = None
    epsilon: float = 10.0
    delta: float = 1e-7
    unlock_steps: int = 1

    def __post_init__(self) -> None:
        if self.initial < 0 or self.arrival_per_tick < 0:
            raise ConfigValidationError("block counts must be >= 0")
        if self.initial == 0 and self.arrival_per_tick == 0:
            raise ConfigValidationError("block stream produces no blocks")
        if self.max_blocks is not None and self.max_blocks < self.initial:
            raise ConfigValidationError("max_blocks < initial block count")
        if self.unlock_steps < 1:
            raise ConfigValidationError("unlock_steps must be >= 1")


@dataclass
class MetricsReport:
    """Final metrics of one simulation run."""

    scheduler: str
    n_tasks: int
    allocated_count: int
    allocated_weight: float
    delays: tuple[int, ...]        # grant tick - arrival tick, granted only
    evicted: tuple[str, ...]
    runtime_seconds: float
    fair_share_fraction: float

    def delay_stats(self) -> tuple[float, float, float]:
        """(mean, median, p95) of scheduling delays; zeros when empty."""
        if not self.delays:
            return 0.0, 0.0, 0.0
        arr = np.asarray(self.delays, dtype=float)
        return (float(arr.mean()), float(np.median(arr)),
                float(np.percentile(arr, 95)))


@dataclass
class SimulationResult:
    report: MetricsReport
    outcomes: list[ScheduleOutcome] = field(default_factory=list)
    blocks: dict[str, Block] = field(default_factory=dict)


def _resolve(spec: TaskSpec, existing_ids: Sequence[str]) -> Task | None:
    """Fix a task's demand vector at arrival time; None if explicit block
    ids are not all present yet."""
    demand_vec = spec.demand.as_array()
    if spec.blocks.kind == "most_recent":
        n = min(spec.blocks.count, len(existing_ids))
        ids = tuple(existing_ids[-n:])
    else:
        if any(b not in existing_ids for b in spec.blocks.ids):
            return None
        ids = spec.blocks.ids
    return Task(
        id=spec.id, weight=spec.weight,
        demand={b: demand_vec.copy() for b in ids},
        arrival=spec.arrival, timeout=spec.timeout, tag=spec.tag)


def _finish(scheduler: Scheduler, outcomes, granted_tasks, delays, evicted,
            n_tasks, runtime, blocks, stream, n_share) -> SimulationResult:
    if blocks:
        capacity = next(iter(blocks.values())).capacity_array()
        fair = fair_share_fraction(granted_tasks, capacity, n_share)
    else:
        fair = 0.0
    report = MetricsReport(
        scheduler=scheduler.name,
        n_tasks=n_tasks,
        allocated_count=len(granted_tasks),
        allocated_weight=float(sum(t.weight for t in granted_tasks)),
        delays=tuple(delays),
        evicted=tuple(sorted(evicted)),
        runtime_seconds=runtime,
        fair_share_fraction=fair,
    )
    return SimulationResult(report, outcomes, blocks)


def run_online(tasks: Sequence[TaskSpec], stream: BlockStreamSpec,
               scheduler: Scheduler, batch_period: float,
               grid: Sequence[float] = DEFAULT_ALPHA_GRID,
               horizon: int | None = None,
               n_share: int = 50) -> SimulationResult:
    """Run the online event loop.

    batch_period may be math.inf for a single terminal batch. The horizon
    defaults to the last arrival plus the largest timeout (plus one batch
    period), so every task gets at least one scheduling opportunity.
    """
    grid = validate_grid(grid)
    if batch_period != math.inf and (batch_period < 1
                                     or int(batch_period) != batch_period):
        raise ConfigValidationError("batch_period must be a positive integer"
                                    " or infinity")
    for spec in tasks:
        if spec.demand.alphas != grid:
            raise ConfigValidationError(
                f"task {spec.id}: demand grid does not match simulation grid")

    capacity = block_capacity_curve(
        DpGuarantee(stream.epsilon, stream.delta), grid)
    if horizon is None:
        last_arrival = max((t.arrival for t in tasks), default=0)
        max_timeout = max((t.timeout or 0 for t in tasks), default=0)
        horizon = last_arrival + max_timeout
        if batch_period != math.inf:
            horizon += int(batch_period)

    by_arrival: dict[int, list[TaskSpec]] = {}
    for spec in sorted(tasks, key=lambda s: (s.arrival, s.id)):
        if spec.arrival < 0:
            raise ConfigValidationError(f"task {spec.id}: negative arrival")
        by_arrival.setdefault(spec.arrival, []).append(spec)

    blocks: dict[str, Block] = {}
    block_order: list[str] = []
    pending: list[Task] = []
    held: list[TaskSpec] = []
    granted_tasks: list[Task] = []
    delays: list[int] = []
    evicted: list[str] = []
    outcomes: list[ScheduleOutcome] = []
    runtime = 0.0
    next_block = 0

    def admit_block(tick: int) -> None:
        nonlocal next_block
        if stream.max_blocks is not None and next_block >= stream.max_blocks:
            return
        bid = block_id(next_block)
        blocks[bid] = Block(bid, capacity, arrival_tick=tick,
                            unlock_steps=stream.unlock_steps)
        block_order.append(bid)
        next_block += 1

    for t in range(0, horizon + 1):
        if t == 0:
            for _ in range(stream.initial):
                admit_block(0)
        else:
            for _ in range(stream.arrival_per_tick):
                admit_block(t)

        still_held = []
        for spec in held:
            task = _resolve(spec, block_order)
            if task is None:
                still_held.append(spec)
            else:
                pending.append(task)
        held = still_held
        for spec in by_arrival.get(t, ()):  # arrivals this tick
            task = _resolve(spec, block_order)
            if task is None:
                held.append(spec)
            else:
                pending.append(task)

        # eviction precedes scheduling: a task timing out at a scheduling
        # tick is evicted, not scheduled
        def timed_out(task: Task) -> bool:
            return task.timeout is not None and t >= task.arrival + task.timeout
        evicted.extend(task.id for task in pending if timed_out(task))
        evicted.extend(s.id for s in held
                       if s.timeout is not None and t >= s.arrival + s.timeout)
        pending = [task for task in pending if not timed_out(task)]
        held = [s for s in held
                if s.timeout is None or t < s.arrival + s.timeout]

        is_batch = (t == horizon) if math.isinf(batch_period) \
            else (t % int(batch_period) == 0)
        if not is_batch:
            continue

        availability = {bid: unlocked_capacity(b, t, batch_period)
                        for bid, b in blocks.items()}
        start = time.perf_counter()
        outcome = scheduler.schedule(pending, blocks, availability)
        runtime += time.perf_counter() - start
        check_filter_safety(blocks)
        granted_ids = set(outcome.granted)
        for task in pending:
            if task.id in granted_ids:
                outcome.grant_tick[task.id] = t
                delays.append(t - task.arrival)
                granted_tasks.append(task)
        pending = [task for task in pending if task.id not in granted_ids]
        outcomes.append(outcome)

    evicted.extend(task.id for task in pending)  # unresolved at horizon
    evicted.extend(s.id for s in held)
    return _finish(scheduler, outcomes, granted_tasks, delays, evicted,
                   len(tasks), runtime, blocks, stream, n_share)


def run_offline(tasks: Sequence[TaskSpec], n_blocks: int,
                scheduler: Scheduler,
                grid: Sequence[float] = DEFAULT_ALPHA_GRID,
                epsilon: float = 10.0, delta: float = 1e-7,
                n_share: int = 50) -> SimulationResult:
    """Single scheduling pass over a fixed workload with all `n_blocks`
    blocks present and fully unlocked."""
    grid = validate_grid(grid)
    capacity = block_capacity_curve(DpGuarantee(epsilon, delta), grid)
    blocks = {block_id(i): Block(block_id(i), capacity)
              for i in range(n_blocks)}
    order = [block_id(i) for i in range(n_blocks)]
    resolved: list[Task] = []
    for spec in sorted(tasks, key=lambda s: (s.arrival, s.id)):
        task = _resolve(spec, order)
        if task is not None:
            resolved.append(task)
    availability = {bid: b.remaining() for bid, b in blocks.items()}
    start = time.perf_counter()
    outcome = scheduler.schedule(resolved, blocks, availability)
    runtime = time.perf_counter() - start
    check_filter_safety(blocks)
    granted_ids = set(outcome.granted)
    granted_tasks = [t for t in resolved if t.id in granted_ids]
    for task in granted_tasks:
        outcome.grant_tick[task.id] = 0
    delays = [0] * len(granted_tasks)
    stream = BlockStreamSpec(initial=max(n_blocks, 1), epsilon=epsilon,
                             delta=delta)
    return _finish(scheduler, [outcome], granted_tasks, delays, [],
                   len(tasks), runtime, blocks, stream, n_share)
