"""Market definition, scenario space and lattice indexing.

Conventions used throughout the package:

* Assets are indexed from 0.
* A single-step *column* is an m-bit up/down vector.  Columns carry the
  1-based label ``j`` of the reverse-lexicographic order, so ``j = 1`` is the
  all-up column and ``j = 2**m`` the all-down column.  Arrays over the column
  space are stored at position ``j - 1``.
* A *scenario* is an ordered tuple of ``n`` columns.  Its flat index treats the
  columns as digits in base ``2**m`` with the first step most significant, so
  the completions of a prefix occupy a contiguous block.
* A recombinant *node* is identified by its level and per-asset up counts.
  Levels are enumerated in lexicographic order of the up counts (asset 0 most
  significant), which is NumPy's C order on a ``(k+1,)*m`` grid.
"""
from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    ArbitrageViolation,
    DimensionError,
    IndexOutOfRange,
    LevelOverflow,
    NonpositivePrice,
)


@dataclass(frozen=True)
class Asset:
    initial_price: float
    up_ratio: float
    down_ratio: float


@dataclass(frozen=True)
class MarketParams:
    """m binomial assets traded over n periods with riskless growth factor R."""

    num_assets: int
    num_steps: int
    growth_factor: float
    assets: tuple[Asset, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "assets", tuple(self.assets))
        _check(self)

    @classmethod
    def from_arrays(cls, initial_prices, up_ratios, down_ratios, growth_factor, num_steps):
        assets = tuple(
            Asset(float(s), float(u), float(d))
            for s, u, d in zip(initial_prices, up_ratios, down_ratios, strict=True)
        )
        return cls(len(assets), int(num_steps), float(growth_factor), assets)

    @classmethod
    def from_mapping(cls, raw: Mapping) -> MarketParams:
        assets = tuple(
            Asset(float(a["initial_price"]), float(a["up_ratio"]), float(a["down_ratio"]))
            for a in raw["assets"]
        )
        m = int(raw.get("num_assets", len(assets)))
        return cls(m, int(raw["num_steps"]), float(raw["growth_factor"]), assets)

    def with_steps(self, num_steps: int) -> MarketParams:
        return MarketParams(self.num_assets, num_steps, self.growth_factor, self.assets)

    @cached_property
    def initial_prices(self) -> np.ndarray:
        return np.array([a.initial_price for a in self.assets])

    @cached_property
    def up(self) -> np.ndarray:
        return np.array([a.up_ratio for a in self.assets])

    @cached_property
    def down(self) -> np.ndarray:
        return np.array([a.down_ratio for a in self.assets])

    @property
    def num_columns(self) -> int:
        return 1 << self.num_assets


def _check(p: MarketParams) -> None:
    if p.num_assets < 1 or p.num_steps < 1:
        raise DimensionError(f"need m >= 1 and n >= 1, got m={p.num_assets}, n={p.num_steps}")
    if len(p.assets) != p.num_assets:
        raise DimensionError(f"num_assets={p.num_assets} but {len(p.assets)} assets given")
    R = p.growth_factor
    for i, a in enumerate(p.assets):
        if not a.initial_price > 0:
            raise NonpositivePrice(f"asset {i}: initial price {a.initial_price} must be > 0")
        if not 0 < a.down_ratio < R < a.up_ratio:
            raise ArbitrageViolation(
                f"asset {i}: need 0 < D < R < U, got D={a.down_ratio}, R={R}, U={a.up_ratio}"
            )


def validate_params(raw: MarketParams | Mapping) -> MarketParams:
    """Check a candidate market and return it as a ``MarketParams``.

    Accepts an existing record (re-checked and returned unchanged) or a
    mapping with keys ``growth_factor``, ``num_steps`` and ``assets``.
    """
    if isinstance(raw, MarketParams):
        _check(raw)
        return raw
    return MarketParams.from_mapping(raw)


def risk_neutral_weights(params: MarketParams) -> tuple[np.ndarray, np.ndarray]:
    """Per-asset CRR up-probabilities b_i = (R - D_i)/(U_i - D_i).

    Returns ``(b, order)`` where ``order`` is the stable 0-based permutation
    sorting ``b`` into non-increasing order, i.e. ``b[order]`` is sorted.
    """
    b = (params.growth_factor - params.down) / (params.up - params.down)
    order = np.argsort(-b, kind="stable")
    return b, order


# ---------------------------------------------------------------------------
# columns and scenarios


@dataclass(frozen=True)
class Column:
    bits: tuple[int, ...]

    @property
    def index(self) -> int:
        return index_of_column(self)

    @property
    def position(self) -> int:
        return self.index - 1

    def __len__(self) -> int:
        return len(self.bits)


def column_of_index(j: int, m: int) -> Column:
    n_cols = 1 << m
    if not 1 <= j <= n_cols:
        raise IndexOutOfRange(f"column index {j} outside 1..{n_cols}")
    code = n_cols - j
    return Column(tuple((code >> (m - 1 - i)) & 1 for i in range(m)))


def index_of_column(col: Column | Sequence[int]) -> int:
    bits = col.bits if isinstance(col, Column) else tuple(col)
    m = len(bits)
    code = 0
    for bit in bits:
        if bit not in (0, 1):
            raise IndexOutOfRange(f"column entries must be 0/1, got {bits}")
        code = (code << 1) | bit
    return (1 << m) - code


def column_bits(m: int) -> np.ndarray:
    """All 2**m columns as a ``(2**m, m)`` int array, row ``j-1`` is column ``j``."""
    codes = (1 << m) - 1 - np.arange(1 << m)
    shifts = np.arange(m - 1, -1, -1)
    return ((codes[:, None] >> shifts) & 1).astype(np.int64)


@dataclass(frozen=True)
class Scenario:
    columns: tuple[Column, ...]

    @property
    def num_steps(self) -> int:
        return len(self.columns)

    def matrix(self) -> np.ndarray:
        """The m x n 0/1 matrix whose k-th column is the k-th step's moves."""
        return np.array([c.bits for c in self.columns], dtype=np.int64).T

    def up_counts(self, level: int | None = None) -> tuple[int, ...]:
        cols = self.columns if level is None else self.columns[:level]
        m = len(self.columns[0]) if self.columns else 0
        return tuple(sum(c.bits[i] for c in cols) for i in range(m))

    def node(self, level: int | None = None) -> NodeId:
        k = self.num_steps if level is None else level
        return NodeId(k, self.up_counts(k))


def scenario_of_positions(positions: Sequence[int], m: int) -> Scenario:
    return Scenario(tuple(column_of_index(int(p) + 1, m) for p in positions))


def scenario_index(scn: Scenario) -> int:
    m = len(scn.columns[0].bits)
    idx = 0
    for col in scn.columns:
        idx = idx * (1 << m) + col.position
    return idx


def scenario_of_index(idx: int, m: int, n: int) -> Scenario:
    base = 1 << m
    if not 0 <= idx < base**n:
        raise IndexOutOfRange(f"scenario index {idx} outside 0..{base**n - 1}")
    digits = []
    for _ in range(n):
        idx, r = divmod(idx, base)
        digits.append(r)
    return scenario_of_positions(digits[::-1], m)


def scenario_bits(indices: np.ndarray, m: int, n: int) -> np.ndarray:
    """Vectorised move bits: ``(len(indices), n, m)`` array for flat scenario indices."""
    base = 1 << m
    indices = np.asarray(indices, dtype=np.int64)
    powers = base ** np.arange(n - 1, -1, -1, dtype=np.int64)
    positions = (indices[:, None] // powers) % base
    return column_bits(m)[positions]


# ---------------------------------------------------------------------------
# recombinant graph


@dataclass(frozen=True, order=True)
class NodeId:
    level: int
    up_counts: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "up_counts", tuple(int(u) for u in self.up_counts))
        if self.level < 0 or any(not 0 <= u <= self.level for u in self.up_counts):
            raise IndexOutOfRange(f"invalid node: level {self.level}, up counts {self.up_counts}")

    @property
    def down_counts(self) -> tuple[int, ...]:
        return tuple(self.level - u for u in self.up_counts)

    def label(self) -> str:
        return "-".join(str(u) for u in self.up_counts)

    @classmethod
    def root(cls, m: int) -> NodeId:
        return cls(0, (0,) * m)


def _check_node(params: MarketParams, node: NodeId) -> None:
    if len(node.up_counts) != params.num_assets or node.level > params.num_steps:
        raise IndexOutOfRange(f"node {node} does not belong to this market")


def asset_price(params: MarketParams, node: NodeId, asset: int) -> float:
    """S_i(0) * U_i**u_i * D_i**(k - u_i) at ``node`` (asset index 0-based)."""
    _check_node(params, node)
    if not 0 <= asset < params.num_assets:
        raise IndexOutOfRange(f"asset {asset} outside 0..{params.num_assets - 1}")
    u = np.array(node.up_counts)
    return float(node_prices(params, u, node.level)[asset])


def node_prices(params: MarketParams, up_counts: np.ndarray, level) -> np.ndarray:
    """Vectorised prices for up-count array ``(..., m)`` at ``level`` (scalar or broadcastable)."""
    up_counts = np.asarray(up_counts)
    downs = np.asarray(level)[..., None] - up_counts if np.ndim(level) else level - up_counts
    return params.initial_prices * params.up**up_counts * params.down**downs


def node_successor(params: MarketParams, node: NodeId, col: Column) -> NodeId:
    _check_node(params, node)
    if node.level >= params.num_steps:
        raise LevelOverflow(f"node at level {node.level} is terminal (n={params.num_steps})")
    if len(col.bits) != params.num_assets:
        raise IndexOutOfRange("column width does not match the number of assets")
    return NodeId(node.level + 1, tuple(u + b for u, b in zip(node.up_counts, col.bits)))


def level_grid(m: int, k: int) -> np.ndarray:
    """Up counts of all ``(k+1)**m`` level-k nodes, lexicographic, shape ``(count, m)``."""
    return np.indices((k + 1,) * m).reshape(m, -1).T


def enumerate_level(params: MarketParams, k: int) -> list[NodeId]:
    if not 0 <= k <= params.num_steps:
        raise IndexOutOfRange(f"level {k} outside 0..{params.num_steps}")
    return [NodeId(k, tuple(row)) for row in level_grid(params.num_assets, k).tolist()]


def node_position(node: NodeId) -> int:
    """Position of ``node`` within ``enumerate_level`` of its level."""
    return int(np.ravel_multi_index(node.up_counts, (node.level + 1,) * len(node.up_counts)))


def successor_positions(m: int, k: int) -> np.ndarray:
    """``(count_k, 2**m)`` positions in level k+1 of every successor of every level-k node."""
    grid = level_grid(m, k)
    succ = grid[:, None, :] + column_bits(m)[None, :, :]
    return np.ravel_multi_index(tuple(np.moveaxis(succ, -1, 0)), (k + 2,) * m)


def multinomial(counts: Sequence[int]) -> int:
    total = sum(counts)
    out = math.factorial(total)
    for c in counts:
        out //= math.factorial(c)
    return out
