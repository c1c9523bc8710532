"""Exact and approximate knapsack solvers.

Three layers:
  * a scalar 0/1 knapsack FPTAS via profit scaling,
  * the single-block multi-alpha variant (one FPTAS run per alpha),
  * an exact solver for the full per-block existential-alpha problem,
    by branch and bound over task subsets.

All solvers are pure and deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .blocks import FEASIBILITY_REL_TOL

_ABS_TOL = 1e-12


class IntractableInstanceError(RuntimeError):
    """The exact solver refuses instances beyond its configured limits."""


def _fits(total: float, capacity: float) -> bool:
    return total <= capacity * (1 + FEASIBILITY_REL_TOL) + _ABS_TOL


@dataclass(frozen=True)
class ScalarKnapsackInstance:
    demands: tuple[float, ...]
    weights: tuple[float, ...]
    capacity: float

    def __post_init__(self) -> None:
        if len(self.demands) != len(self.weights):
            raise ValueError("demands and weights must have equal length")
        if any(d < 0 or not math.isfinite(d) for d in self.demands):
            raise ValueError("demands must be finite and >= 0")
        if any(w <= 0 or not math.isfinite(w) for w in self.weights):
            raise ValueError("weights must be finite and > 0")
        if self.capacity < 0:
            raise ValueError("capacity must be >= 0")


def scalar_knapsack_fptas(inst: ScalarKnapsackInstance, eta: float,
                          ) -> tuple[tuple[int, ...], float]:
    """(1 - eta)-approximate 0/1 knapsack by profit-scaling DP.

    Profits are rounded down on a grid of size K = eta * w_max / n and the
    DP minimises demand per scaled profit. Returns (selected indices,
    total original weight); runtime polynomial in n and 1/eta.
    """
    if eta <= 0:
        raise ValueError("eta must be > 0")
    n = len(inst.demands)
    if n == 0:
        return (), 0.0
    # items that cannot fit alone are never selectable
    feasible = [i for i in range(n) if _fits(inst.demands[i], inst.capacity)]
    if not feasible:
        return (), 0.0

    weights = [inst.weights[i] for i in feasible]
    demands = [inst.demands[i] for i in feasible]

    if len(set(weights)) == 1:
        # equal weights: smallest-demand-first is exact
        order = sorted(range(len(demands)), key=lambda i: (demands[i], i))
        chosen: list[int] = []
        total = 0.0
        for i in order:
            if _fits(total + demands[i], inst.capacity):
                total += demands[i]
                chosen.append(feasible[i])
        return tuple(sorted(chosen)), weights[0] * len(chosen)

    w_max = max(weights)
    k = eta * w_max / len(weights)
    scaled = [int(w // k) for w in weights]
    top = sum(scaled)

    # dp[p] = minimal demand achieving scaled profit exactly p
    dp = np.full(top + 1, np.inf)
    dp[0] = 0.0
    take = np.zeros((len(weights), top + 1), dtype=bool)
    for i, (p, d) in enumerate(zip(scaled, demands)):
        if p == 0:
            continue
        shifted = np.full(top + 1, np.inf)
        shifted[p:] = dp[: top + 1 - p] + d
        better = shifted < dp
        take[i] = better
        dp = np.where(better, shifted, dp)

    reachable = np.nonzero(dp <= inst.capacity * (1 + FEASIBILITY_REL_TOL)
                           + _ABS_TOL)[0]
    best_p = int(reachable[-1]) if len(reachable) else 0
    # recover the selection backwards
    chosen = []
    p = best_p
    for i in range(len(weights) - 1, -1, -1):
        if p > 0 and take[i, p]:
            chosen.append(feasible[i])
            p -= scaled[i]
    # items with scaled profit 0 that still fit add weight for free
    total_d = sum(inst.demands[i] for i in chosen)
    for i, p0 in zip(feasible, scaled):
        if p0 == 0 and i not in chosen and _fits(total_d + inst.demands[i],
                                                 inst.capacity):
            chosen.append(i)
            total_d += inst.demands[i]
    chosen = tuple(sorted(chosen))
    return chosen, float(sum(inst.weights[i] for i in chosen))


def fptas_values_per_alpha(demands: np.ndarray, weights: Sequence[float],
                           capacities: np.ndarray, eta: float,
                           ) -> np.ndarray:
    """Approximate max packable weight per alpha for one block.

    demands: (n_tasks, n_alphas); capacities: (n_alphas,). At each alpha
    only tasks with a strictly positive demand there participate.
    """
    n_alpha = demands.shape[1]
    out = np.zeros(n_alpha)
    for a in range(n_alpha):
        col = demands[:, a]
        idx = np.nonzero(col > 0)[0]
        if len(idx) == 0:
            continue
        inst = ScalarKnapsackInstance(
            tuple(col[i] for i in idx),
            tuple(weights[i] for i in idx),
            float(capacities[a]),
        )
        _, w_hat = scalar_knapsack_fptas(inst, eta)
        out[a] = w_hat
    return out


def single_block_privacy_knapsack(demands: np.ndarray,
                                  weights: Sequence[float],
                                  capacities: np.ndarray, eta: float,
                                  ) -> tuple[tuple[int, ...], np.ndarray, int]:
    """Approximate the single-block privacy knapsack: one FPTAS run per
    alpha, keeping the alpha with the largest packable weight.

    Returns (best selection, per-alpha approximate maxima, arg-max alpha
    index); ties break toward the smaller alpha.
    """
    w_hat = fptas_values_per_alpha(demands, weights, capacities, eta)
    best_alpha = int(np.argmax(w_hat))  # first max == smallest alpha on ties
    col = demands[:, best_alpha]
    idx = np.nonzero(col > 0)[0]
    if len(idx) == 0:
        return (), w_hat, best_alpha
    inst = ScalarKnapsackInstance(
        tuple(col[i] for i in idx),
        tuple(weights[i] for i in idx),
        float(capacities[best_alpha]),
    )
    sel, _ = scalar_knapsack_fptas(inst, eta)
    return tuple(int(idx[i]) for i in sel), w_hat, best_alpha


@dataclass(frozen=True)
class PrivacyKnapsackInstance:
    """Tasks with per-block per-alpha demands against per-block capacities.

    demands[i] maps block index -> demand vector over the shared grid;
    capacities maps block index -> capacity vector.
    """

    demands: tuple[dict[int, np.ndarray], ...]
    weights: tuple[float, ...]
    capacities: dict[int, np.ndarray]

    @property
    def n_tasks(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class ExactAllocation:
    selected: tuple[int, ...]
    total_weight: float
    block_alphas: dict[int, int]  # surviving alpha index per block


def exact_privacy_knapsack(inst: PrivacyKnapsackInstance,
                           max_tasks: int = 20,
                           node_limit: int = 5_000_000) -> ExactAllocation:
    """Exact optimum of the privacy knapsack by depth-first branch and
    bound over task subsets.

    A subset is feasible iff every block has at least one alpha whose
    summed demand fits its capacity; blocks are checked independently.
    Among equal-weight optima the lexicographically smallest selected set
    wins. Raises IntractableInstanceError beyond the configured limits.
    """
    n = inst.n_tasks
    if n > max_tasks:
        raise IntractableInstanceError(
            f"instance has {n} tasks, exact-solver limit is {max_tasks}")
    if n == 0:
        return ExactAllocation((), 0.0, _surviving_alphas(inst, {}))

    blocks = sorted(inst.capacities)
    sums = {j: np.zeros(len(inst.capacities[j])) for j in blocks}
    # suffix sums of weights for the additive upper bound
    suffix = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] + inst.weights[i]

    best_weight = -1.0
    best_set: tuple[int, ...] = ()
    nodes = 0

    def feasible_with(task: int) -> bool:
        for j, d in inst.demands[task].items():
            cap = inst.capacities.get(j)
            if cap is None:
                return False
            total = sums[j] + d
            if not np.any(total <= cap * (1 + FEASIBILITY_REL_TOL) + _ABS_TOL):
                return False
        return True

    def visit(i: int, weight: float, chosen: list[int]) -> None:
        nonlocal best_weight, best_set, nodes
        nodes += 1
        if nodes > node_limit:
            raise IntractableInstanceError("branch-and-bound node limit hit")
        if i == n:
            key = tuple(chosen)
            if (weight > best_weight + _ABS_TOL
                    or (abs(weight - best_weight) <= _ABS_TOL
                        and key < best_set)):
                best_weight = weight
                best_set = key
            return
        if weight + suffix[i] < best_weight - _ABS_TOL:
            return
        # include-first keeps lexicographically smaller sets ahead
        if feasible_with(i):
            for j, d in inst.demands[i].items():
                sums[j] += d
            chosen.append(i)
            visit(i + 1, weight + inst.weights[i], chosen)
            chosen.pop()
            for j, d in inst.demands[i].items():
                sums[j] -= d
        visit(i + 1, weight, chosen)

    visit(0, 0.0, [])
    # rebuild block sums for the winning set to report surviving alphas
    final = {j: np.zeros(len(inst.capacities[j])) for j in blocks}
    for i in best_set:
        for j, d in inst.demands[i].items():
            final[j] += d
    return ExactAllocation(best_set, max(best_weight, 0.0),
                           _surviving_alphas(inst, final))


def _surviving_alphas(inst: PrivacyKnapsackInstance,
                      sums: dict[int, np.ndarray]) -> dict[int, int]:
    out: dict[int, int] = {}
    for j, cap in inst.capacities.items():
        total = sums.get(j, np.zeros(len(cap)))
        ok = np.nonzero(total <= cap * (1 + FEASIBILITY_REL_TOL) + _ABS_TOL)[0]
        out[j] = int(ok[0]) if len(ok) else -1
    return out
