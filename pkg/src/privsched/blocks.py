"""Privacy blocks: consumable multi-alpha resources with per-block filter
semantics and online budget unlocking.

A block's filter stays open as long as at least one alpha order has
consumption within capacity; consumption itself is per-order additive.
Block state is mutated only by the scheduling loop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .rdp import RdpCurve

# Relative slack for feasibility comparisons, so exact-fit demands are not
# rejected due to float rounding.
FEASIBILITY_REL_TOL = 1e-9
_ABS_TOL = 1e-12


class BlockNotArrivedError(RuntimeError):
    """Capacity queried for a tick before the block's arrival."""


class BudgetSafetyError(AssertionError):
    """A block violated the per-filter safety invariant."""


@dataclass
class Block:
    """A data block with a per-alpha capacity and a privacy filter."""

    id: str
    capacity: RdpCurve
    arrival_tick: int = 0
    unlock_steps: int = 1  # N: budget unlocks in 1/N increments
    consumed: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        if self.unlock_steps < 1:
            raise ValueError("unlock_steps must be >= 1")
        self.consumed = np.zeros(len(self.capacity.alphas))

    @property
    def grid(self) -> tuple[float, ...]:
        return self.capacity.alphas

    def capacity_array(self) -> np.ndarray:
        return self.capacity.as_array()

    def remaining(self) -> np.ndarray:
        """Per-alpha remaining capacity against the full (unlocked) budget."""
        return np.maximum(self.capacity_array() - self.consumed, 0.0)

    def consume(self, demand: np.ndarray) -> None:
        """Add `demand` to the consumed accumulator at every alpha.

        Contract: the caller must have checked `filter_grant` against the
        current availability before consuming.
        """
        demand = np.asarray(demand, dtype=float)
        if demand.shape != self.consumed.shape:
            raise ValueError("demand shape does not match block grid")
        if (demand < 0).any():
            raise ValueError("demand must be non-negative")
        self.consumed = self.consumed + demand

    def filter_satisfied(self) -> bool:
        """Safety invariant: some alpha still within capacity."""
        cap = self.capacity_array()
        return bool(np.any(self.consumed <= cap * (1 + FEASIBILITY_REL_TOL)
                           + _ABS_TOL))


def unlocked_capacity(block: Block, now: int, batch_period: float,
                      already_allocated: np.ndarray | None = None,
                      ) -> np.ndarray:
    """Available per-alpha budget of `block` at scheduling time `now`.

    A 1/N fraction of the capacity unlocks per scheduling step; a block
    arriving exactly at a scheduling instant counts that instant as its
    first step. Previously granted demands are subtracted; floored at 0.
    """
    if now < block.arrival_tick:
        raise BlockNotArrivedError(
            f"block {block.id} arrives at t={block.arrival_tick}, now={now}")
    if batch_period <= 0:
        raise ValueError("batch_period must be > 0")
    if already_allocated is None:
        already_allocated = block.consumed
    elapsed = now - block.arrival_tick
    if math.isinf(batch_period):
        steps = 1
    else:
        steps = max(1, math.ceil(elapsed / batch_period))
    frac = min(steps, block.unlock_steps) / block.unlock_steps
    avail = frac * block.capacity_array() - np.asarray(already_allocated)
    return np.maximum(avail, 0.0)


def filter_grant(demand: np.ndarray, available: np.ndarray,
                 granted: np.ndarray | None = None,
                 rel_tol: float = FEASIBILITY_REL_TOL) -> bool:
    """All-or-nothing grant check for one block.

    True iff at least one alpha satisfies granted + demand <= available,
    where `granted` is the cumulative demand already granted against the
    same availability snapshot.
    """
    demand = np.asarray(demand, dtype=float)
    available = np.asarray(available, dtype=float)
    total = demand if granted is None else demand + np.asarray(granted)
    return bool(np.any(total <= available * (1 + rel_tol) + _ABS_TOL))


def check_filter_safety(blocks: Mapping[str, Block]) -> None:
    """Raise if any block has no surviving alpha order."""
    for block in blocks.values():
        if not block.filter_satisfied():
            raise BudgetSafetyError(
                f"block {block.id}: consumption exceeds capacity at every alpha")
