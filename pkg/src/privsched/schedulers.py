"""Scheduling policies over privacy blocks: the packing-efficiency greedy
scheduler (dpk), the dominant-share heuristic (dpf), first-come-first-serve
(fcfs), and an exact solver baseline (optimal).

All policies share one greedy grant loop; they differ in how candidate
tasks are ordered. Orderings are computed once per scheduling invocation
against the availability snapshot taken at batch start.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .blocks import Block, filter_grant
from .knapsack import (
    ExactAllocation,
    PrivacyKnapsackInstance,
    exact_privacy_knapsack,
    fptas_values_per_alpha,
)

INFEASIBLE_SCORE = 0.0  # sorted last
FREE_SCORE = math.inf   # zero-demand tasks sort first


class ContractViolationError(RuntimeError):
    """An operation was applied outside its stated preconditions."""


@dataclass(frozen=True)
class Task:
    """A scheduling request: weight, arrival, timeout, per-block demand."""

    id: str
    weight: float
    demand: dict[str, np.ndarray]  # block id -> per-alpha demand vector
    arrival: int = 0
    timeout: int | None = None
    tag: str = ""

    def __post_init__(self) -> None:
        if self.weight <= 0:
            raise ValueError("task weight must be > 0")
        if not self.demand:
            raise ValueError("task must request at least one block")
        for bid, d in self.demand.items():
            if (np.asarray(d) < 0).any():
                raise ValueError(f"negative demand on block {bid}")


@dataclass
class ScheduleOutcome:
    """Result of one scheduling pass."""

    granted: list[str] = field(default_factory=list)
    rejected: list[str] = field(default_factory=list)
    grant_tick: dict[str, int] = field(default_factory=dict)
    consumption: dict[str, np.ndarray] = field(default_factory=dict)
    granted_weight: float = 0.0


def dpf_efficiency(task: Task, availability: Mapping[str, np.ndarray]) -> float:
    """Dominant-share score: weight over the largest demand-to-capacity
    ratio across requested (block, alpha) coordinates.

    Zero-capacity coordinates are skipped unless a whole block is
    unusable (positive demand, zero capacity at every alpha), in which
    case the task scores 0 and sorts last.
    """
    worst = 0.0
    for bid, d in task.demand.items():
        c = np.asarray(availability[bid], dtype=float)
        d = np.asarray(d, dtype=float)
        usable = c > 0
        if not usable.any():
            if (d > 0).any():
                return INFEASIBLE_SCORE
            continue
        ratios = d[usable] / c[usable]
        if len(ratios):
            worst = max(worst, float(ratios.max()))
    if worst == 0.0:
        return FREE_SCORE
    return task.weight / worst


def area_efficiency(task: Task, availability: Mapping[str, np.ndarray]) -> float:
    """Weight over the summed demand-to-capacity ratios across requested
    blocks; defined for single-order grids only."""
    denom = 0.0
    for bid, d in task.demand.items():
        d = np.asarray(d, dtype=float)
        c = np.asarray(availability[bid], dtype=float)
        if len(c) != 1:
            raise ContractViolationError(
                "area_efficiency requires a single-order grid")
        if c[0] <= 0:
            if d[0] > 0:
                return INFEASIBLE_SCORE
            continue
        denom += float(d[0] / c[0])
    if denom == 0.0:
        return FREE_SCORE
    return task.weight / denom


def compute_best_alpha(block_id: str, availability: np.ndarray,
                       candidates: Sequence[Task], eta: float) -> int:
    """Index of the alpha order packing the largest approximate weight on
    one block, using a (2/3) * eta approximation per order.

    With no candidate demand the alpha with the largest remaining
    capacity wins; ties go to the smaller alpha.
    """
    tasks = [t for t in candidates
             if block_id in t.demand
             and (np.asarray(t.demand[block_id]) > 0).any()]
    if not tasks:
        return int(np.argmax(availability))
    demands = np.stack([np.asarray(t.demand[block_id], dtype=float)
                        for t in tasks])
    weights = [t.weight for t in tasks]
    w_hat = fptas_values_per_alpha(demands, weights, availability,
                                   (2.0 / 3.0) * eta)
    return int(np.argmax(w_hat))


def dpk_efficiency(task: Task, best_alphas: Mapping[str, int],
                   availability: Mapping[str, np.ndarray]) -> float:
    """Weight over summed demand-to-capacity ratios taken only at each
    block's best alpha; other orders contribute nothing."""
    denom = 0.0
    for bid, d in task.demand.items():
        a = best_alphas[bid]
        da = float(np.asarray(d)[a])
        ca = float(np.asarray(availability[bid])[a])
        if ca <= 0:
            if da > 0:
                return INFEASIBLE_SCORE
            continue
        denom += da / ca
    if denom == 0.0:
        return FREE_SCORE
    return task.weight / denom


def greedy_allocate(ordered_tasks: Sequence[Task],
                    blocks: Mapping[str, Block],
                    availability: Mapping[str, np.ndarray],
                    ) -> ScheduleOutcome:
    """Grant tasks in the given order; each grant must pass the filter on
    every requested block against the batch-start availability plus the
    demands granted earlier in this pass. Skipped tasks do not stop the
    scan."""
    outcome = ScheduleOutcome()
    batch_used = {bid: np.zeros_like(avail)
                  for bid, avail in availability.items()}
    for task in ordered_tasks:
        ok = all(bid in availability for bid in task.demand)
        if ok:
            ok = all(
                filter_grant(d, availability[bid], batch_used[bid])
                for bid, d in task.demand.items()
            )
        if ok:
            for bid, d in task.demand.items():
                batch_used[bid] = batch_used[bid] + np.asarray(d, dtype=float)
                blocks[bid].consume(np.asarray(d, dtype=float))
            outcome.granted.append(task.id)
            outcome.granted_weight += task.weight
        else:
            outcome.rejected.append(task.id)
    outcome.consumption = {bid: b.consumed.copy() for bid, b in blocks.items()}
    return outcome


def _sorted_by_score(tasks: Sequence[Task], score) -> list[Task]:
    # ties: score desc, arrival asc, id asc
    return sorted(tasks, key=lambda t: (-score(t), t.arrival, t.id))


class Scheduler:
    """Base interface: order pending tasks and run the greedy grant loop."""

    name = "base"

    def schedule(self, tasks: Sequence[Task], blocks: Mapping[str, Block],
                 availability: Mapping[str, np.ndarray]) -> ScheduleOutcome:
        raise NotImplementedError


class DpkScheduler(Scheduler):
    """Greedy packing with per-block best-alpha efficiency scores."""

    name = "dpk"

    def __init__(self, eta: float = 0.1):
        if eta <= 0:
            raise ValueError("eta must be > 0")
        self.eta = eta

    def schedule(self, tasks, blocks, availability):
        best_alphas = {
            bid: compute_best_alpha(bid, avail, tasks, self.eta)
            for bid, avail in availability.items()
        }
        score = lambda t: dpk_efficiency(t, best_alphas, availability)
        return greedy_allocate(_sorted_by_score(tasks, score), blocks,
                               availability)


class DpfScheduler(Scheduler):
    """Smallest-dominant-share-first ordering; fair-share classification
    is reporting-only (see `fair_share_fraction`)."""

    name = "dpf"

    def __init__(self, n_share: int = 50):
        self.n_share = n_share

    def schedule(self, tasks, blocks, availability):
        score = lambda t: dpf_efficiency(t, availability)
        return greedy_allocate(_sorted_by_score(tasks, score), blocks,
                               availability)


class FcfsScheduler(Scheduler):
    """Arrival order, ties by id."""

    name = "fcfs"

    def schedule(self, tasks, blocks, availability):
        ordered = sorted(tasks, key=lambda t: (t.arrival, t.id))
        return greedy_allocate(ordered, blocks, availability)


class OptimalScheduler(Scheduler):
    """Exact privacy-knapsack solution; intractable instances raise."""

    name = "optimal"

    def __init__(self, max_tasks: int = 20, node_limit: int = 5_000_000):
        self.max_tasks = max_tasks
        self.node_limit = node_limit

    def schedule(self, tasks, blocks, availability):
        tasks = sorted(tasks, key=lambda t: t.id)
        bids = sorted(availability)
        bindex = {bid: j for j, bid in enumerate(bids)}
        inst = PrivacyKnapsackInstance(
            demands=tuple(
                {bindex[bid]: np.asarray(d, dtype=float)
                 for bid, d in t.demand.items() if bid in bindex}
                for t in tasks
            ),
            weights=tuple(t.weight for t in tasks),
            capacities={bindex[bid]: np.asarray(availability[bid], dtype=float)
                        for bid in bids},
        )
        # tasks requesting unknown blocks can never be granted
        grantable = [i for i, t in enumerate(tasks)
                     if all(bid in bindex for bid in t.demand)]
        if len(grantable) != len(tasks):
            inst = PrivacyKnapsackInstance(
                demands=tuple(inst.demands[i] for i in grantable),
                weights=tuple(inst.weights[i] for i in grantable),
                capacities=inst.capacities,
            )
            tasks_for_solver = [tasks[i] for i in grantable]
        else:
            tasks_for_solver = list(tasks)
        alloc: ExactAllocation = exact_privacy_knapsack(
            inst, max_tasks=self.max_tasks, node_limit=self.node_limit)
        selected_ids = {tasks_for_solver[i].id for i in alloc.selected}
        outcome = greedy_allocate(
            [t for t in tasks_for_solver if t.id in selected_ids],
            blocks, availability)
        outcome.rejected.extend(
            t.id for t in tasks if t.id not in selected_ids)
        return outcome


def make_scheduler(name: str, **params) -> Scheduler:
    factory = {
        "dpk": DpkScheduler,
        "dpf": DpfScheduler,
        "fcfs": FcfsScheduler,
        "optimal": OptimalScheduler,
    }
    try:
        cls = factory[name]
    except KeyError:
        raise ValueError(f"unknown scheduler {name!r}") from None
    return cls(**params)


def fair_share_fraction(tasks: Sequence[Task],
                        block_capacity: np.ndarray,
                        n_share: int = 50) -> float:
    """Fraction of `tasks` whose best-case capacity share is at most
    1/n_share of a fresh block's budget (reporting metric only)."""
    if not tasks:
        return 0.0
    cap = np.asarray(block_capacity, dtype=float)
    usable = cap > 0
    fair = 0
    for t in tasks:
        share = 0.0
        for d in t.demand.values():
            d = np.asarray(d, dtype=float)[usable]
            share = max(share, float((d / cap[usable]).min()) if len(d) else 0.0)
        if share <= 1.0 / n_share + 1e-12:
            fair += 1
    return fair / len(tasks)
