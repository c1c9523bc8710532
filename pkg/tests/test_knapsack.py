"""Knapsack solvers against brute-force enumeration oracles."""
from __future__ import annotations

import numpy as np
import pytest

from privsched.knapsack import (
    IntractableInstanceError,
    PrivacyKnapsackInstance,
    ScalarKnapsackInstance,
    exact_privacy_knapsack,
    fptas_values_per_alpha,
    scalar_knapsack_fptas,
    single_block_privacy_knapsack,
)

from conftest import brute_force_scalar


class TestScalarFptas:
    def test_zero_capacity_selects_nothing(self):
        inst = ScalarKnapsackInstance((0.5, 0.2), (1.0, 2.0), 0.0)
        assert scalar_knapsack_fptas(inst, 0.1) == ((), 0.0)

    def test_single_fitting_item(self):
        inst = ScalarKnapsackInstance((0.5,), (3.0,), 1.0)
        for eta in (0.5, 0.1, 0.01):
            assert scalar_knapsack_fptas(inst, eta) == ((0,), 3.0)

    def test_empty_instance(self):
        inst = ScalarKnapsackInstance((), (), 1.0)
        assert scalar_knapsack_fptas(inst, 0.1) == ((), 0.0)

    def test_oversized_items_excluded(self):
        inst = ScalarKnapsackInstance((2.0, 0.4), (100.0, 1.0), 1.0)
        sel, w = scalar_knapsack_fptas(inst, 0.1)
        assert sel == (1,) and w == 1.0

    def test_equal_weights_is_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(1, 14))
            demands = tuple(rng.uniform(0.05, 1.0, size=n))
            inst = ScalarKnapsackInstance(demands, (2.0,) * n,
                                          float(rng.uniform(0.2, 3.0)))
            _, w = scalar_knapsack_fptas(inst, 0.3)
            assert w == pytest.approx(
                brute_force_scalar(demands, (2.0,) * n, inst.capacity))

    def test_twelve_items_eta01_within_guarantee(self):
        rng = np.random.default_rng(42)
        demands = tuple(rng.uniform(0.05, 1.0, size=12))
        weights = tuple(rng.uniform(0.5, 10.0, size=12))
        inst = ScalarKnapsackInstance(demands, weights, 2.5)
        _, w = scalar_knapsack_fptas(inst, 0.1)
        opt = brute_force_scalar(demands, weights, 2.5)
        assert w >= 0.9 * opt - 1e-9

    def test_selection_weight_consistent_and_feasible(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(1, 12))
            demands = tuple(rng.uniform(0.05, 1.0, size=n))
            weights = tuple(rng.uniform(0.5, 10.0, size=n))
            capacity = float(rng.uniform(0.3, 4.0))
            inst = ScalarKnapsackInstance(demands, weights, capacity)
            sel, w = scalar_knapsack_fptas(inst, 0.2)
            assert w == pytest.approx(sum(weights[i] for i in sel))
            assert sum(demands[i] for i in sel) <= capacity * (1 + 1e-9) + 1e-12

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            ScalarKnapsackInstance((0.5,), (1.0, 2.0), 1.0)
        with pytest.raises(ValueError):
            ScalarKnapsackInstance((-0.5,), (1.0,), 1.0)
        with pytest.raises(ValueError):
            ScalarKnapsackInstance((0.5,), (0.0,), 1.0)
        with pytest.raises(ValueError):
            scalar_knapsack_fptas(ScalarKnapsackInstance((), (), 1.0), 0.0)


class TestPerAlpha:
    def test_all_zero_capacities(self):
        demands = np.array([[0.5, 0.5], [0.2, 0.2]])
        w_hat = fptas_values_per_alpha(demands, (1.0, 1.0),
                                       np.zeros(2), 0.1)
        assert (w_hat == 0).all()
        _, _, best = single_block_privacy_knapsack(
            demands, (1.0, 1.0), np.zeros(2), 0.1)
        assert best == 0  # tie-break toward the smaller order

    def test_larger_capacity_order_dominates(self):
        demands = np.array([[0.6, 0.6], [0.6, 0.6], [0.6, 0.6]])
        w_hat = fptas_values_per_alpha(demands, (1.0, 1.0, 1.0),
                                       np.array([1.0, 2.0]), 0.1)
        assert w_hat[1] > w_hat[0]

    def test_skewed_orders_single_block(self):
        """Two tasks cheap at the first order but expensive at the second
        (0.5 / 1.5) and one uniform task (0.4 / 0.4): with capacity 1.5 at
        both orders the first order packs all three tasks, the second only
        one."""
        demands = np.array([[0.5, 1.5], [0.5, 1.5], [0.4, 0.4]])
        caps = np.array([1.5, 1.5])
        sel, w_hat, best = single_block_privacy_knapsack(
            demands, (1.0, 1.0, 1.0), caps, 0.1)
        assert best == 0
        assert w_hat[0] == pytest.approx(3.0)
        assert w_hat[1] == pytest.approx(1.0)
        assert sel == (0, 1, 2)


class TestExact:
    def test_empty_instance(self):
        inst = PrivacyKnapsackInstance((), (), {0: np.array([1.0])})
        alloc = exact_privacy_knapsack(inst)
        assert alloc.selected == () and alloc.total_weight == 0.0

    def test_all_fit(self):
        inst = PrivacyKnapsackInstance(
            demands=tuple({0: np.array([0.2, 0.9])} for _ in range(4)),
            weights=(1.0, 1.0, 1.0, 1.0),
            capacities={0: np.array([1.0, 1.0])},
        )
        alloc = exact_privacy_knapsack(inst)
        assert alloc.selected == (0, 1, 2, 3)
        assert alloc.total_weight == 4.0

    def test_lexicographic_tie_break(self):
        # two disjoint optima of equal weight; the smaller index set wins
        inst = PrivacyKnapsackInstance(
            demands=({0: np.array([0.8])}, {0: np.array([0.8])}),
            weights=(1.0, 1.0),
            capacities={0: np.array([1.0])},
        )
        alloc = exact_privacy_knapsack(inst)
        assert alloc.selected == (0,)

    def test_task_limit_raises(self):
        inst = PrivacyKnapsackInstance(
            demands=tuple({0: np.array([0.1])} for _ in range(5)),
            weights=(1.0,) * 5,
            capacities={0: np.array([1.0])},
        )
        with pytest.raises(IntractableInstanceError):
            exact_privacy_knapsack(inst, max_tasks=4)

    def test_node_limit_raises(self):
        inst = PrivacyKnapsackInstance(
            demands=tuple({0: np.array([0.1])} for _ in range(10)),
            weights=(1.0,) * 10,
            capacities={0: np.array([2.0])},
        )
        with pytest.raises(IntractableInstanceError):
            exact_privacy_knapsack(inst, node_limit=5)

    def test_surviving_alpha_reported(self):
        inst = PrivacyKnapsackInstance(
            demands=({0: np.array([1.5, 0.5])},),
            weights=(1.0,),
            capacities={0: np.array([1.0, 1.0])},
        )
        alloc = exact_privacy_knapsack(inst)
        assert alloc.selected == (0,)
        assert alloc.block_alphas[0] == 1

    def test_matches_enumeration_on_random_instances(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            n = int(rng.integers(1, 9))
            m = int(rng.integers(1, 3))
            n_alpha = int(rng.integers(1, 4))
            caps = {j: rng.uniform(0.5, 2.0, size=n_alpha) for j in range(m)}
            demands = []
            for _ in range(n):
                k = int(rng.integers(1, m + 1))
                js = rng.choice(m, size=k, replace=False)
                demands.append({int(j): rng.uniform(0.05, 1.2, size=n_alpha)
                                for j in sorted(js)})
            weights = tuple(float(w) for w in rng.uniform(0.5, 5.0, size=n))
            inst = PrivacyKnapsackInstance(tuple(demands), weights, caps)
            alloc = exact_privacy_knapsack(inst)
            assert alloc.total_weight == pytest.approx(
                _enumerate_optimum(inst), abs=1e-9)


def _enumerate_optimum(inst: PrivacyKnapsackInstance) -> float:
    best = 0.0
    n = inst.n_tasks
    for mask in range(1 << n):
        sums: dict[int, np.ndarray] = {}
        weight = 0.0
        for i in range(n):
            if mask >> i & 1:
                weight += inst.weights[i]
                for j, d in inst.demands[i].items():
                    sums[j] = sums.get(j, 0.0) + d
        ok = all(
            np.any(total <= inst.capacities[j] * (1 + 1e-9) + 1e-12)
            for j, total in sums.items())
        if ok:
            best = max(best, weight)
    return best
