"""RDP curves for common noise mechanisms, composition arithmetic, and
translation between RDP and traditional (epsilon, delta)-DP.

Curves are tabulated on a fixed discrete grid of orders alpha > 1. All
operations here are pure functions on immutable values.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DEFAULT_ALPHA_GRID: tuple[float, ...] = (
    1.5, 1.75, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 16.0, 32.0, 64.0,
)


class InvalidParameterError(ValueError):
    """A mechanism or translation parameter is out of range."""


class GridMismatchError(ValueError):
    """Curves defined on different alpha grids cannot be combined."""


class GuaranteeOverflowError(ValueError):
    """Composition produced a vacuous guarantee (delta >= 1)."""


def validate_grid(orders: Iterable[float]) -> tuple[float, ...]:
    """Check that `orders` is a strictly increasing sequence of alphas > 1."""
    grid = tuple(float(a) for a in orders)
    if not grid:
        raise InvalidParameterError("alpha grid must not be empty")
    if any(a <= 1.0 for a in grid):
        raise InvalidParameterError("all alpha orders must be > 1")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidParameterError("alpha orders must be strictly increasing")
    return grid


@dataclass(frozen=True)
class RdpCurve:
    """A privacy-loss bound eps(alpha) tabulated on an alpha grid."""

    alphas: tuple[float, ...]
    eps: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "alphas", validate_grid(self.alphas))
        object.__setattr__(self, "eps", tuple(float(e) for e in self.eps))
        if len(self.eps) != len(self.alphas):
            raise InvalidParameterError("eps values must match grid length")
        if any(e < 0 or not math.isfinite(e) for e in self.eps):
            raise InvalidParameterError("eps values must be finite and >= 0")

    def epsilon_at(self, alpha: float) -> float:
        try:
            return self.eps[self.alphas.index(float(alpha))]
        except ValueError:
            raise KeyError(f"alpha {alpha} not on grid") from None

    def as_array(self) -> np.ndarray:
        return np.asarray(self.eps, dtype=float)

    def scaled(self, factor: float) -> "RdpCurve":
        if factor < 0:
            raise InvalidParameterError("scale factor must be >= 0")
        return RdpCurve(self.alphas, tuple(factor * e for e in self.eps))

    @staticmethod
    def zero(grid: Sequence[float] = DEFAULT_ALPHA_GRID) -> "RdpCurve":
        grid = validate_grid(grid)
        return RdpCurve(grid, (0.0,) * len(grid))

    @staticmethod
    def from_array(values: np.ndarray,
                   grid: Sequence[float] = DEFAULT_ALPHA_GRID) -> "RdpCurve":
        return RdpCurve(tuple(grid), tuple(float(v) for v in values))


@dataclass(frozen=True)
class DpGuarantee:
    """A traditional (epsilon, delta)-DP guarantee."""

    epsilon: float
    delta: float

    def __post_init__(self) -> None:
        if self.epsilon < 0 or not math.isfinite(self.epsilon):
            raise InvalidParameterError("epsilon must be finite and >= 0")
        if not (0.0 <= self.delta < 1.0):
            raise InvalidParameterError("delta must be in [0, 1)")


def gaussian_curve(sigma: float,
                   grid: Sequence[float] = DEFAULT_ALPHA_GRID) -> RdpCurve:
    """RDP curve of the Gaussian mechanism with noise std `sigma`
    (sensitivity 1): eps(alpha) = alpha / (2 sigma^2).
    """
    grid = validate_grid(grid)
    if sigma <= 0:
        raise InvalidParameterError("sigma must be > 0")
    return RdpCurve(grid, tuple(a / (2.0 * sigma * sigma) for a in grid))


def laplace_curve(scale: float,
                  grid: Sequence[float] = DEFAULT_ALPHA_GRID) -> RdpCurve:
    """RDP curve of the Laplace mechanism with scale `b` (sensitivity 1).

    Renyi divergence of two unit-shifted Laplace distributions:
        eps(a) = log((a/(2a-1)) e^{(a-1)/b} + ((a-1)/(2a-1)) e^{-a/b}) / (a-1)
    Flattens toward the pure-DP limit 1/b as alpha grows.
    """
    grid = validate_grid(grid)
    if scale <= 0:
        raise InvalidParameterError("scale must be > 0")
    eps = tuple(_laplace_eps(a, scale) for a in grid)
    return RdpCurve(grid, eps)


def _laplace_eps(alpha: float, scale: float) -> float:
    a = float(alpha)
    # log-sum-exp of the two terms for numerical stability at small scales
    t1 = math.log(a / (2 * a - 1)) + (a - 1) / scale
    t2 = math.log((a - 1) / (2 * a - 1)) - a / scale
    hi = max(t1, t2)
    val = hi + math.log(math.exp(t1 - hi) + math.exp(t2 - hi))
    return max(0.0, val / (a - 1))


def subsampled_gaussian_curve(sigma: float, q: float, steps: int = 1,
                              grid: Sequence[float] = DEFAULT_ALPHA_GRID,
                              ) -> RdpCurve:
    """RDP upper bound for the Poisson-subsampled Gaussian mechanism,
    composed over `steps` identical steps.

    Integer orders use the binomial-expansion bound
        eps(a) = log( sum_k C(a,k) (1-q)^(a-k) q^k e^{(k^2-k)/(2 sigma^2)} ) / (a-1);
    fractional grid orders are linearly interpolated between neighbouring
    integer orders (with eps taken as 0 at alpha = 1, an approximation for
    sub-2 orders). q = 1 is special-cased to the exact Gaussian curve.
    """
    grid = validate_grid(grid)
    if sigma <= 0:
        raise InvalidParameterError("sigma must be > 0")
    if not (0.0 < q <= 1.0):
        raise InvalidParameterError("q must be in (0, 1]")
    if steps < 1:
        raise InvalidParameterError("steps must be >= 1")
    if q == 1.0:
        return gaussian_curve(sigma, grid).scaled(float(steps))

    def base_int(k: int) -> float:
        # base-mechanism exponent (k-1) * eps_gauss(k) = (k^2 - k) / (2 sigma^2)
        return (k * k - k) / (2.0 * sigma * sigma)

    per_step = _amplified_curve(grid, q, base_int)
    return RdpCurve(grid, tuple(float(steps) * e for e in per_step))


def subsampled_laplace_curve(scale: float, q: float, steps: int = 1,
                             grid: Sequence[float] = DEFAULT_ALPHA_GRID,
                             ) -> RdpCurve:
    """RDP upper bound for the Poisson-subsampled Laplace mechanism.

    Same generic integer-order amplification as the subsampled Gaussian,
    with the Laplace base divergence in the exponent; an upper bound.
    """
    grid = validate_grid(grid)
    if scale <= 0:
        raise InvalidParameterError("scale must be > 0")
    if not (0.0 < q <= 1.0):
        raise InvalidParameterError("q must be in (0, 1]")
    if steps < 1:
        raise InvalidParameterError("steps must be >= 1")
    if q == 1.0:
        return laplace_curve(scale, grid).scaled(float(steps))

    def base_int(k: int) -> float:
        if k <= 1:
            return 0.0
        return (k - 1) * _laplace_eps(float(k), scale)

    per_step = _amplified_curve(grid, q, base_int)
    return RdpCurve(grid, tuple(float(steps) * e for e in per_step))


def _amplified_curve(grid: tuple[float, ...], q: float, base_int) -> list[float]:
    """Per-step amplified eps at every grid order; integer orders via the
    binomial bound, fractional orders via linear interpolation."""
    max_int = int(math.ceil(grid[-1]))
    eps_int = {1: 0.0}
    for n in range(2, max_int + 1):
        eps_int[n] = _amplified_int_order(n, q, base_int)

    out = []
    for a in grid:
        lo = int(math.floor(a))
        hi = int(math.ceil(a))
        if lo == hi:
            out.append(eps_int[lo])
        else:
            frac = (a - lo) / (hi - lo)
            out.append((1 - frac) * eps_int[lo] + frac * eps_int[hi])
    return out


def _amplified_int_order(n: int, q: float, base_int) -> float:
    # log-sum-exp over binomial terms
    log_terms = []
    lq = math.log(q)
    l1q = math.log1p(-q)
    for k in range(0, n + 1):
        lb = math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
        log_terms.append(lb + (n - k) * l1q + k * lq + base_int(k))
    hi = max(log_terms)
    s = hi + math.log(sum(math.exp(t - hi) for t in log_terms))
    return max(0.0, s / (n - 1))


def compose(curves: Sequence[RdpCurve]) -> RdpCurve:
    """Pointwise sum of RDP curves sharing one grid (additive composition)."""
    if not curves:
        raise InvalidParameterError("compose requires at least one curve")
    grid = curves[0].alphas
    total = np.zeros(len(grid))
    for c in curves:
        if c.alphas != grid:
            raise GridMismatchError("curves are tabulated on different grids")
        total += c.as_array()
    return RdpCurve(grid, tuple(total))


def rdp_to_dp(curve: RdpCurve, delta: float) -> tuple[float, float]:
    """Translate an RDP curve into the tightest (epsilon, delta)-DP bound.

    Returns (epsilon_dp, best_alpha) minimising
    eps(alpha) + log(1/delta)/(alpha - 1); ties go to the smaller alpha.
    """
    if not (0.0 < delta < 1.0):
        raise InvalidParameterError("delta must be in (0, 1)")
    penalty = math.log(1.0 / delta)
    best_eps = math.inf
    best_alpha = curve.alphas[0]
    for a, e in zip(curve.alphas, curve.eps):
        v = e + penalty / (a - 1.0)
        if v < best_eps:
            best_eps = v
            best_alpha = a
    return best_eps, best_alpha


def basic_dp_compose(guarantees: Sequence[DpGuarantee]) -> DpGuarantee:
    """Basic DP composition: componentwise sums of epsilons and deltas."""
    eps = sum(g.epsilon for g in guarantees)
    delta = sum(g.delta for g in guarantees)
    if delta >= 1.0:
        raise GuaranteeOverflowError("composed delta >= 1; guarantee vacuous")
    return DpGuarantee(eps, delta)


def block_capacity_curve(global_guarantee: DpGuarantee,
                         grid: Sequence[float] = DEFAULT_ALPHA_GRID,
                         ) -> RdpCurve:
    """Per-alpha RDP budget of a block enforcing a global (eps, delta)-DP
    guarantee: eps(alpha) = max(0, eps_G - log(1/delta_G)/(alpha-1)).

    Orders where the raw value is negative get capacity 0 (unusable under
    the given delta).
    """
    grid = validate_grid(grid)
    if global_guarantee.delta <= 0:
        raise InvalidParameterError("global delta must be > 0")
    penalty = math.log(1.0 / global_guarantee.delta)
    eps = tuple(max(0.0, global_guarantee.epsilon - penalty / (a - 1.0))
                for a in grid)
    return RdpCurve(grid, eps)


def load_curve_table(path: str,
                     grid: Sequence[float] = DEFAULT_ALPHA_GRID,
                     ) -> dict[str, RdpCurve]:
    """Load tabulated curves from a JSON file of records
    {name, alphas, eps}. Every record's grid must match `grid`."""
    grid = validate_grid(grid)
    with open(path) as fh:
        records = json.load(fh)
    curves: dict[str, RdpCurve] = {}
    for rec in records:
        name = rec["name"]
        rec_grid = tuple(float(a) for a in rec["alphas"])
        if rec_grid != grid:
            raise GridMismatchError(
                f"curve {name!r}: grid {rec_grid} does not match {grid}")
        curves[name] = RdpCurve(rec_grid, tuple(rec["eps"]))
    return curves


def save_curve_table(path: str, curves: dict[str, RdpCurve]) -> None:
    records = [{"name": name, "alphas": list(c.alphas), "eps": list(c.eps)}
               for name, c in curves.items()]
    with open(path, "w") as fh:
        json.dump(records, fh, indent=2)
