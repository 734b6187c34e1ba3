"""Single-step measures, the martingale system and lattice expectations.

Multi-step measures are handled as products of one single-step measure (the
only kind the pricing routes need); an explicit vector over all scenarios is
built only by ``product_measure`` for small test instances.
"""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import (
    BudgetExceeded,
    DimensionMismatch,
    InvalidMeasure,
    PrefixLevelMismatch,
    ZeroMassEvent,
)
from .market_core import (
    Column,
    MarketParams,
    NodeId,
    Scenario,
    column_bits,
    scenario_bits,
)

NORMALISATION_TOL = 1e-9
DEFAULT_MAX_COMPLETION_BITS = 24


@dataclass(frozen=True)
class Measure:
    """Probability vector over the 2**m columns, in column order."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float).ravel().copy()
        if w.size == 0 or w.size & (w.size - 1):
            raise InvalidMeasure(f"length {w.size} is not a power of two")
        if (w < -NORMALISATION_TOL).any():
            raise InvalidMeasure(f"negative mass {w.min()}")
        w = np.maximum(w, 0.0)
        total = w.sum()
        if abs(total - 1.0) > NORMALISATION_TOL:
            raise InvalidMeasure(f"masses sum to {total}, not 1")
        w /= total
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def num_assets(self) -> int:
        return self.weights.size.bit_length() - 1

    def __getitem__(self, col: Column) -> float:
        return float(self.weights[col.position])

    def support(self, tol: float = 0.0) -> np.ndarray:
        return np.flatnonzero(self.weights > tol)

    def up_probabilities(self) -> np.ndarray:
        """E(l_i): probability that asset i moves up."""
        return self.weights @ column_bits(self.num_assets)


def build_psi(params: MarketParams) -> np.ndarray:
    """m x 2**m matrix of one-step price ratios, Psi[i, j-1] = psi_i(omega_j)."""
    bits = column_bits(params.num_assets).T
    return (params.up - params.down)[:, None] * bits + params.down[:, None]


def martingale_constraints(params: MarketParams) -> tuple[np.ndarray, np.ndarray]:
    """``(A, d)``: rows of Psi with rhs R, then the all-ones row with rhs 1."""
    psi = build_psi(params)
    A = np.vstack([psi, np.ones(psi.shape[1])])
    d = np.append(np.full(params.num_assets, params.growth_factor), 1.0)
    return A, d


def is_martingale(p: Measure, params: MarketParams, tol: float = 1e-9) -> bool:
    if p.weights.size != params.num_columns:
        raise DimensionMismatch(
            f"measure has {p.weights.size} columns, market has {params.num_columns}"
        )
    residual = build_psi(params) @ p.weights - params.growth_factor
    return bool(np.abs(residual).max() <= tol)


def product_measure(p: Measure, n: int) -> np.ndarray:
    """Explicit p^{(x)n} over all scenarios (flat scenario-index order)."""
    out = np.ones(1)
    for _ in range(n):
        out = np.kron(out, p.weights)
    return out


def increment_distribution(p: Measure, h: int) -> np.ndarray:
    """Law of the up-count increment after h i.i.d. steps, on a ``(h+1,)*m`` grid."""
    m = p.num_assets
    bits = column_bits(m)
    dist = np.zeros((h + 1,) * m)
    dist[(0,) * m] = 1.0
    for step in range(h):
        new = np.zeros_like(dist)
        src = tuple(slice(0, step + 1) for _ in range(m))
        for j in p.support():
            dst = tuple(slice(b, b + step + 1) for b in bits[j])
            new[dst] += p.weights[j] * dist[src]
        dist = new
    return dist


def _prefix_positions(prefix: Scenario | Sequence[Column]) -> list[int]:
    cols = prefix.columns if isinstance(prefix, Scenario) else tuple(prefix)
    return [c.position for c in cols]


def conditional_expectation(payoff, where: NodeId | Scenario | Sequence[Column],
                            per_step_measure: Measure, params: MarketParams,
                            max_completion_bits: int = DEFAULT_MAX_COMPLETION_BITS) -> float:
    """E[X | node] under the product of ``per_step_measure`` over the remaining steps.

    Undiscounted.  A ``NodeId`` is accepted only for payoffs that depend on
    terminal prices; path-dependent payoffs need the explicit prefix.
    """
    m, n = params.num_assets, params.num_steps
    p = per_step_measure
    if p.weights.size != params.num_columns:
        raise DimensionMismatch("measure and market disagree on the number of assets")
    if isinstance(where, NodeId):
        if payoff.path_dependent:
            raise PrefixLevelMismatch("path-dependent payoffs need an explicit prefix")
        if where.level > n or len(where.up_counts) != m:
            raise PrefixLevelMismatch(f"node {where} is not in this market")
        h = n - where.level
        dist = increment_distribution(p, h)
        inc = np.indices(dist.shape).reshape(m, -1).T
        ups = np.asarray(where.up_counts) + inc
        values = payoff.terminal_values(params, ups)
        return float(values @ dist.ravel())
    positions = _prefix_positions(where)
    k = len(positions)
    if k > n:
        raise PrefixLevelMismatch(f"prefix of length {k} exceeds n={n}")
    h = n - k
    if m * h > max_completion_bits:
        raise BudgetExceeded(f"{m * h} completion bits exceed the cap {max_completion_bits}")
    base = 1 << m
    start = 0
    for pos in positions:
        start = start * base + pos
    indices = start * base**h + np.arange(base**h)
    values = payoff.path_values(params, scenario_bits(indices, m, n))
    return float(values @ product_measure(p, h))


def single_step_conditionals(p_multi: np.ndarray, prefix: Scenario | Sequence[Column],
                             m: int, n: int) -> Measure:
    """Conditional law of the next column given ``prefix`` under an explicit measure."""
    p_multi = np.asarray(p_multi, dtype=float)
    base = 1 << m
    if p_multi.size != base**n:
        raise DimensionMismatch(f"expected {base**n} scenario masses, got {p_multi.size}")
    positions = _prefix_positions(prefix)
    k = len(positions)
    if k >= n:
        raise PrefixLevelMismatch(f"prefix of length {k} has no next step (n={n})")
    blocks = p_multi.reshape((base,) * n)
    sub = blocks[tuple(positions)]
    child = sub.reshape(base, -1).sum(axis=1)
    total = child.sum()
    if total <= 0.0:
        raise ZeroMassEvent(f"prefix {positions} has zero probability")
    return Measure(child / total)
