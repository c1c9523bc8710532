"""Shared scenario builders and brute-force oracles for the test suite.

The oracles here are deliberately independent of the library code: subset
enumeration for knapsack optima and per-block existential feasibility
checks re-derived from first principles.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from privsched.blocks import Block
from privsched.rdp import RdpCurve
from privsched.schedulers import Task

# Slightly looser than the library's feasibility slack so the oracle never
# disagrees on exact-fit boundaries.
ORACLE_TOL = 1e-9


def single_order_block(bid: str, capacity: float) -> Block:
    return Block(bid, RdpCurve((2.0,), (capacity,)))


def two_order_block(bid: str, cap1: float, cap2: float) -> Block:
    return Block(bid, RdpCurve((2.0, 3.0), (cap1, cap2)))


def three_block_scenario():
    """Four unit-weight tasks over three single-order blocks of capacity 1.

    One spread task wants 0.6 on every block; three narrow tasks want 0.7
    on one block each. Dominant-share ordering grants only the spread
    task; packing-efficiency ordering grants the three narrow ones.
    """
    blocks = {f"b{i}": single_order_block(f"b{i}", 1.0) for i in range(3)}
    tasks = [
        Task("t1", 1.0, {f"b{i}": np.array([0.6]) for i in range(3)},
             arrival=0),
        Task("t2", 1.0, {"b0": np.array([0.7])}, arrival=1),
        Task("t3", 1.0, {"b1": np.array([0.7])}, arrival=2),
        Task("t4", 1.0, {"b2": np.array([0.7])}, arrival=3),
    ]
    return blocks, tasks


def two_block_two_order_scenario():
    """Six unit-weight tasks over two blocks with two orders (capacity 1 at
    both orders on both blocks).

    Four skewed tasks are cheap at one order and expensive at the other
    (0.5 / 1.5); two uniform tasks cost 0.9 at both orders. Dominant-share
    ordering grants only the two uniform tasks; per-block best-order
    packing grants the four skewed ones.
    """
    blocks = {"b0": two_order_block("b0", 1.0, 1.0),
              "b1": two_order_block("b1", 1.0, 1.0)}
    tasks = [
        Task("s1", 1.0, {"b0": np.array([0.5, 1.5])}),
        Task("s2", 1.0, {"b0": np.array([0.5, 1.5])}),
        Task("s3", 1.0, {"b1": np.array([1.5, 0.5])}),
        Task("s4", 1.0, {"b1": np.array([1.5, 0.5])}),
        Task("u1", 1.0, {"b0": np.array([0.9, 0.9])}),
        Task("u2", 1.0, {"b1": np.array([0.9, 0.9])}),
    ]
    return blocks, tasks


def fresh_availability(blocks):
    return {bid: b.remaining() for bid, b in blocks.items()}


def subset_feasible(tasks, capacities) -> bool:
    """Oracle feasibility: every requested block keeps at least one order
    whose summed demand fits its capacity."""
    sums: dict[str, np.ndarray] = {}
    for t in tasks:
        for bid, d in t.demand.items():
            if bid not in capacities:
                return False
            d = np.asarray(d, dtype=float)
            sums[bid] = sums.get(bid, np.zeros(len(d))) + d
    for bid, total in sums.items():
        cap = np.asarray(capacities[bid], dtype=float)
        if not np.any(total <= cap * (1 + ORACLE_TOL) + 1e-12):
            return False
    return True


def brute_force_optimum(tasks, capacities) -> float:
    """Maximum total weight over all feasible subsets, by enumeration."""
    best = 0.0
    for r in range(len(tasks) + 1):
        for combo in itertools.combinations(tasks, r):
            if subset_feasible(combo, capacities):
                best = max(best, sum(t.weight for t in combo))
    return best


def brute_force_scalar(demands, weights, capacity) -> float:
    """0/1 knapsack optimum by enumeration (scalar oracle)."""
    best = 0.0
    n = len(demands)
    for mask in range(1 << n):
        total_d = total_w = 0.0
        for i in range(n):
            if mask >> i & 1:
                total_d += demands[i]
                total_w += weights[i]
        if total_d <= capacity * (1 + ORACLE_TOL) + 1e-12:
            best = max(best, total_w)
    return best


def random_tasks(rng, n, block_ids, n_alpha, max_blocks_per_task=None,
                 weight_choices=(1.0, 2.0, 5.0, 10.0)):
    """Random multi-block multi-order tasks for randomized comparisons."""
    tasks = []
    limit = max_blocks_per_task or len(block_ids)
    for i in range(n):
        k = int(rng.integers(1, min(limit, len(block_ids)) + 1))
        ids = rng.choice(len(block_ids), size=k, replace=False)
        demand = {block_ids[j]: rng.uniform(0.05, 0.9, size=n_alpha)
                  for j in sorted(ids)}
        w = float(weight_choices[int(rng.integers(len(weight_choices)))])
        tasks.append(Task(f"r{i:03d}", w, demand, arrival=i))
    return tasks


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
