"""Contingent-claim payoffs evaluated on terminal nodes or on whole scenarios.

Every payoff exposes two vectorised entry points used by the pricing code:

``terminal_values(params, ups)``
    values at terminal up-count vectors ``ups`` of shape ``(..., m)``; only
    for payoffs that depend on S(n) alone.
``path_values(params, bits)``
    values on scenario move bits of shape ``(count, n, m)``; for every kind.
"""
from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import BudgetExceeded, DimensionMismatch, KindMismatch, WeightError
from .market_core import MarketParams, NodeId, Scenario, level_grid, node_prices, scenario_bits
from .supermodular import DEFAULT_MAX_FIBRE_BITS, DEFAULT_TOL, FibreWitness, fibrewise_violation

WEIGHT_TOL = 1e-9


class Kind(str, Enum):
    BASKET_CALL = "basket_call"
    BASKET_PUT = "basket_put"
    ASIAN_CALL = "asian_call"
    ASIAN_PUT = "asian_put"
    SPREAD = "spread"
    TABLE_TERMINAL = "table_terminal"
    TABLE_PATH = "table_path"


STRUCTURAL = {Kind.BASKET_CALL, Kind.BASKET_PUT, Kind.ASIAN_CALL, Kind.ASIAN_PUT}


def _check_weights(w: np.ndarray) -> np.ndarray:
    if (w < 0).any():
        raise WeightError(f"weights must be non-negative, got {w}")
    sums = np.atleast_2d(w).sum(axis=1)
    if (np.abs(sums - 1.0) > WEIGHT_TOL).any():
        raise WeightError(f"weights must sum to 1, row sums are {sums}")
    return w


def weighted_sum(prices: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """sum_i w_i x_i over the last axis, accumulated asset by asset.

    Unlike a BLAS dot product the rounding does not depend on memory layout,
    so two routes that build the same prices get the same basket bit for bit.
    """
    total = np.zeros(prices.shape[:-1])
    for i, w in enumerate(weights):
        total = total + w * prices[..., i]
    return total


@dataclass(frozen=True)
class PayoffFn:
    kind: Kind
    weights: np.ndarray | None = None
    strike: float = 0.0
    strike_high: float | None = None
    table: np.ndarray | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind in (Kind.TABLE_TERMINAL, Kind.TABLE_PATH):
            if self.table is None:
                raise ValueError(f"{self.kind.value} needs a table")
            object.__setattr__(self, "table", np.asarray(self.table, dtype=float).ravel())
            return
        w = _check_weights(np.asarray(self.weights, dtype=float))
        if w.ndim == 2 and self.kind not in (Kind.ASIAN_CALL, Kind.ASIAN_PUT):
            raise WeightError("only Asian payoffs take a per-step weight matrix")
        object.__setattr__(self, "weights", w)
        if self.kind is Kind.SPREAD and not (
            self.strike_high is not None and self.strike < self.strike_high
        ):
            raise ValueError("a spread needs strikes K1 < K2")

    # -- constructors -------------------------------------------------------

    @classmethod
    def basket_call(cls, weights, strike: float) -> PayoffFn:
        return cls(Kind.BASKET_CALL, np.asarray(weights, float), float(strike))

    @classmethod
    def basket_put(cls, weights, strike: float) -> PayoffFn:
        return cls(Kind.BASKET_PUT, np.asarray(weights, float), float(strike))

    @classmethod
    def asian_call(cls, weights, strike: float) -> PayoffFn:
        return cls(Kind.ASIAN_CALL, np.asarray(weights, float), float(strike))

    @classmethod
    def asian_put(cls, weights, strike: float) -> PayoffFn:
        return cls(Kind.ASIAN_PUT, np.asarray(weights, float), float(strike))

    @classmethod
    def spread(cls, weights, low: float, high: float) -> PayoffFn:
        return cls(Kind.SPREAD, np.asarray(weights, float), float(low), float(high))

    @classmethod
    def table_terminal(cls, values) -> PayoffFn:
        return cls(Kind.TABLE_TERMINAL, table=values)

    @classmethod
    def table_path(cls, values) -> PayoffFn:
        return cls(Kind.TABLE_PATH, table=values)

    @classmethod
    def from_mapping(cls, raw: Mapping) -> PayoffFn:
        kind = Kind(raw["kind"])
        if kind in (Kind.TABLE_TERMINAL, Kind.TABLE_PATH):
            return cls(kind, table=raw["values"])
        if kind is Kind.SPREAD:
            low, high = raw["strikes"]
            return cls.spread(raw["weights"], low, high)
        return cls(kind, np.asarray(raw["weights"], float), float(raw["strike"]))

    # -- evaluation ---------------------------------------------------------

    @property
    def path_dependent(self) -> bool:
        return self.kind in (Kind.ASIAN_CALL, Kind.ASIAN_PUT, Kind.TABLE_PATH)

    def terminal_values(self, params: MarketParams, ups) -> np.ndarray:
        if self.path_dependent:
            raise KindMismatch(f"{self.kind.value} depends on the whole price path")
        ups = np.asarray(ups, dtype=np.int64)
        n, m = params.num_steps, params.num_assets
        if self.kind is Kind.TABLE_TERMINAL:
            if self.table.size != (n + 1) ** m:
                raise DimensionMismatch(
                    f"terminal table has {self.table.size} entries, expected {(n + 1) ** m}"
                )
            return self.table[np.ravel_multi_index(tuple(np.moveaxis(ups, -1, 0)), (n + 1,) * m)]
        return self._apply(weighted_sum(node_prices(params, ups, n), self.weights))

    def path_values(self, params: MarketParams, bits) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64)
        m, n = params.num_assets, params.num_steps
        if bits.shape[-2:] != (n, m):
            raise DimensionMismatch(f"scenario bits have shape {bits.shape}, expected (.., {n}, {m})")
        if not self.path_dependent:
            return self.terminal_values(params, bits.sum(axis=-2))
        if self.kind is Kind.TABLE_PATH:
            base = 1 << m
            if self.table.size != base**n:
                raise DimensionMismatch(f"path table has {self.table.size} entries, expected {base**n}")
            codes = bits @ (1 << np.arange(m - 1, -1, -1))
            positions = base - 1 - codes
            idx = positions @ (base ** np.arange(n - 1, -1, -1, dtype=np.int64))
            return self.table[idx]
        w = self.weights if self.weights.ndim == 2 else np.broadcast_to(self.weights, (n, m))
        if w.shape != (n, m):
            raise DimensionMismatch(f"Asian weights have shape {w.shape}, expected {(n, m)}")
        cum = np.cumsum(bits, axis=-2)
        t = np.arange(1, n + 1)[:, None]
        prices = params.initial_prices * params.up**cum * params.down ** (t - cum)
        average = (prices * w).sum(axis=(-2, -1)) / n
        return self._apply(average)

    def _apply(self, x: np.ndarray) -> np.ndarray:
        K = self.strike
        if self.kind in (Kind.BASKET_CALL, Kind.ASIAN_CALL):
            return np.maximum(x - K, 0.0)
        if self.kind in (Kind.BASKET_PUT, Kind.ASIAN_PUT):
            return np.maximum(K - x, 0.0)
        if self.kind is Kind.SPREAD:
            return np.maximum(x - K, 0.0) - np.maximum(x - self.strike_high, 0.0)
        raise KindMismatch(self.kind)  # pragma: no cover


def evaluate(payoff: PayoffFn, where: Scenario | NodeId, params: MarketParams) -> float:
    """Payoff at a full scenario or, for terminal payoffs, at a level-n node."""
    if isinstance(where, NodeId):
        if payoff.path_dependent:
            raise KindMismatch(f"{payoff.kind.value} needs a full scenario, not a node")
        if where.level != params.num_steps:
            raise KindMismatch(f"node level {where.level} is not terminal (n={params.num_steps})")
        return float(payoff.terminal_values(params, np.array(where.up_counts)))
    bits = where.matrix().T[None]
    return float(payoff.path_values(params, bits)[0])


def tabulate_terminal(payoff: PayoffFn, params: MarketParams) -> PayoffFn:
    """A TableTerminal payoff reproducing ``payoff`` on every terminal node."""
    grid = level_grid(params.num_assets, params.num_steps)
    return PayoffFn.table_terminal(payoff.terminal_values(params, grid))


def tabulate_path(fn, params: MarketParams, max_bits: int = 24) -> PayoffFn:
    """A TablePath payoff from ``fn(bits) -> values`` over all scenarios."""
    m, n = params.num_assets, params.num_steps
    if m * n > max_bits:
        raise BudgetExceeded(f"2**{m * n} scenarios exceed the cap 2**{max_bits}")
    bits = scenario_bits(np.arange(1 << (m * n)), m, n)
    return PayoffFn.table_path(fn(bits))


def geometric_asian_call(params: MarketParams, weights, strike: float) -> PayoffFn:
    """Geometric-average Asian basket call as a TablePath payoff (no certificate)."""
    m, n = params.num_assets, params.num_steps
    w = np.broadcast_to(_check_weights(np.asarray(weights, float)), (n, m))

    def fn(bits):
        cum = np.cumsum(bits, axis=-2)
        t = np.arange(1, n + 1)[:, None]
        baskets = (params.initial_prices * params.up**cum * params.down ** (t - cum) * w).sum(-1)
        return np.maximum(np.exp(np.log(baskets).mean(axis=-1)) - strike, 0.0)

    return tabulate_path(fn, params)


# ---------------------------------------------------------------------------
# certificates


class Certificate(str, Enum):
    SUPERMODULAR = "Supermodular"
    SUBMODULAR = "Submodular"
    MODULAR = "Modular"
    NEITHER = "Neither"
    UNKNOWN = "Unknown"

    @property
    def closed_form_legal(self) -> bool:
        return self in (Certificate.SUPERMODULAR, Certificate.SUBMODULAR, Certificate.MODULAR)


@dataclass(frozen=True)
class Certification:
    certificate: Certificate
    structural: bool = False
    witness: FibreWitness | None = None
    reason: str = ""


def certify(payoff: PayoffFn, params: MarketParams, tol: float = DEFAULT_TOL,
            max_bits: int = DEFAULT_MAX_FIBRE_BITS, exhaustive: bool = False) -> Certification:
    """Classify the payoff as fibrewise super/sub/modular.

    Basket and arithmetic Asian calls and puts are certified structurally (a
    convex function of a non-negative combination of prices) unless
    ``exhaustive`` is set; every other kind is checked fibre by fibre.
    """
    if payoff.kind in STRUCTURAL and not exhaustive:
        return Certification(Certificate.SUPERMODULAR, structural=True)
    try:
        up = fibrewise_violation(payoff, params, tol, max_bits)
        down = fibrewise_violation(payoff, params, tol, max_bits, negate=True)
    except BudgetExceeded as exc:
        return Certification(Certificate.UNKNOWN, reason=str(exc))
    if up is None and down is None:
        return Certification(Certificate.MODULAR)
    if up is None:
        return Certification(Certificate.SUPERMODULAR)
    if down is None:
        return Certification(Certificate.SUBMODULAR)
    return Certification(Certificate.NEITHER, witness=up)
