"""No-arbitrage price bounds at every node of the lattice.

Three routes are provided:

* ``backward_induction_bounds``: per-node linear programs folded back from
  the leaves (upper bound of successor upper bounds, lower of lowers).  Works
  for any payoff; path-independent payoffs run on the recombinant graph,
  path-dependent ones on the full event tree.
* ``product_bounds_*`` / ``basket_bounds``: expectations under the n-fold
  product of one extremal single-step measure, valid for fibrewise
  supermodular payoffs (``submodular_bounds`` swaps the measures for
  fibrewise submodular ones).
* ``two_asset_interval``: the explicit segment of martingale measures when
  m = 2.

All bounds at level k are discounted to time k.
"""
from __future__ import annotations

import itertools
import math
from collections.abc import Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import (
    BudgetExceeded,
    Infeasible,
    MassOverflow,
    PrefixLevelMismatch,
    WrongDimension,
)
from .linprog import DEFAULT_TOL, SimplexSolver
from .market_core import (
    Column,
    MarketParams,
    NodeId,
    Scenario,
    column_bits,
    level_grid,
    multinomial,
    node_position,
    risk_neutral_weights,
    scenario_bits,
    successor_positions,
)
from .measures import Measure, martingale_constraints
from .payoffs import PayoffFn, weighted_sum
from .supermodular import (
    chain_column_positions,
    mask_to_column,
    extremal_measures,
    lower_vertex_measure,
    singleton_column_positions,
)

Which = Literal["upper", "lower"]

DEFAULT_MAX_SCENARIO_BITS = 24
DEFAULT_MAX_TERMS = 1 << 22


@dataclass(frozen=True)
class PriceInterval:
    lower: float
    upper: float
    argmax_measure: Measure | None = None
    argmin_measure: Measure | None = None


@dataclass
class BoundsSurface:
    """Per-level bound arrays.

    For path-independent surfaces entry ``i`` of level ``k`` is the i-th node
    of ``enumerate_level(params, k)``; for path-dependent ones it is the
    prefix with flat index ``i`` (columns as base-2**m digits, first step most
    significant).  ``argmax``/``argmin`` hold the single-step optimal vertex
    at each non-terminal node when measures were recorded.
    """

    params: MarketParams
    path_dependent: bool
    lower: list[np.ndarray]
    upper: list[np.ndarray]
    argmax: list[np.ndarray] | None = None
    argmin: list[np.ndarray] | None = None
    method: str = "lp"

    def position(self, where: NodeId | Scenario | Sequence[Column]) -> tuple[int, int]:
        if isinstance(where, NodeId):
            if self.path_dependent:
                raise PrefixLevelMismatch("path-dependent surfaces are indexed by prefixes")
            return where.level, node_position(where)
        cols = where.columns if isinstance(where, Scenario) else tuple(where)
        if not self.path_dependent:
            m = self.params.num_assets
            counts = tuple(sum(c.bits[i] for c in cols) for i in range(m))
            return len(cols), node_position(NodeId(len(cols), counts))
        idx = 0
        for c in cols:
            idx = idx * self.params.num_columns + c.position
        return len(cols), idx

    def interval(self, where) -> PriceInterval:
        k, i = self.position(where)
        amax = amin = None
        if self.argmax is not None and k < self.params.num_steps:
            amax = Measure(self.argmax[k][i])
            amin = Measure(self.argmin[k][i])
        return PriceInterval(float(self.lower[k][i]), float(self.upper[k][i]), amax, amin)

    @property
    def root(self) -> PriceInterval:
        return self.interval(NodeId.root(self.params.num_assets) if not self.path_dependent else ())

    def labels(self, k: int) -> list[str]:
        m = self.params.num_assets
        if not self.path_dependent:
            return ["-".join(map(str, row)) for row in level_grid(m, k).tolist()]
        if k == 0:
            return ["-".join("0" * m)]
        bits = scenario_bits(np.arange(self.params.num_columns**k), m, k)
        return ["-".join(map(str, row)) for row in bits.sum(axis=1).tolist()]

    def prefixes(self, k: int) -> list[str]:
        """1-based column labels of every level-k prefix (path-dependent surfaces)."""
        base = self.params.num_columns
        return ["-".join(str(d + 1) for d in digits)
                for digits in itertools.product(range(base), repeat=k)]


# ---------------------------------------------------------------------------
# single step


def _solver(params: MarketParams, tol: float) -> SimplexSolver:
    A, d = martingale_constraints(params)
    return SimplexSolver(A, d, tol)


def single_step_bounds(params: MarketParams, payoff_vector, tol: float = DEFAULT_TOL) -> PriceInterval:
    """Bounds R^-1 max/min <X, P> over single-step martingale measures P."""
    X = np.asarray(payoff_vector, dtype=float).ravel()
    try:
        solver = _solver(params, tol)
        hi = solver.solve(X, "max")
        lo = solver.solve(X, "min")
    except Infeasible as exc:  # pragma: no cover - validated markets are always feasible
        raise RuntimeError(f"martingale polytope empty for validated market: {exc}") from exc
    R = params.growth_factor
    return PriceInterval(lo.value / R, hi.value / R, Measure(hi.point), Measure(lo.point))


@dataclass(frozen=True)
class TwoAssetInterval:
    p1: float
    p2: float
    t_min: float
    t_max: float

    def measure(self, t: float) -> Measure:
        return Measure([t, self.p1 - t, self.p2 - t, 1.0 - self.p1 - self.p2 + t])

    @property
    def q_min(self) -> Measure:
        return self.measure(self.t_min)

    @property
    def q_max(self) -> Measure:
        return self.measure(self.t_max)


def two_asset_interval(params: MarketParams) -> TwoAssetInterval:
    """Segment Q(t) = (t, p1-t, p2-t, 1-p1-p2+t) of two-asset martingale measures."""
    if params.num_assets != 2:
        raise WrongDimension(f"two_asset_interval needs m = 2, got m = {params.num_assets}")
    b, _ = risk_neutral_weights(params)
    p1, p2 = float(b[0]), float(b[1])
    return TwoAssetInterval(p1, p2, max(p1 + p2 - 1.0, 0.0), min(p1, p2))


# ---------------------------------------------------------------------------
# backward induction


def _fold(params, objectives, sense, tol, threads, keep_points):
    """Optimise each row of ``objectives`` over M_1, in ``threads`` independent chunks."""
    count = objectives.shape[0]
    if threads <= 1 or count < 64:
        vals, pts, _ = _solver(params, tol).solve_batch(objectives, sense)
        return vals, (pts if keep_points else None)
    bounds = np.linspace(0, count, threads + 1).astype(int)

    def work(lohi):
        lo, hi = lohi
        return _solver(params, tol).solve_batch(objectives[lo:hi], sense)[:2]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(work, zip(bounds[:-1], bounds[1:])))
    vals = np.concatenate([p[0] for p in parts])
    pts = np.vstack([p[1] for p in parts]) if keep_points else None
    return vals, pts


def terminal_payoff_values(params: MarketParams, payoff: PayoffFn, path_dependent: bool,
                           max_scenario_bits: int = DEFAULT_MAX_SCENARIO_BITS) -> np.ndarray:
    m, n = params.num_assets, params.num_steps
    if not path_dependent:
        return payoff.terminal_values(params, level_grid(m, n))
    if m * n > max_scenario_bits:
        raise BudgetExceeded(f"2**{m * n} scenarios exceed the cap 2**{max_scenario_bits}")
    total = 1 << (m * n)
    out = np.empty(total)
    chunk = 1 << 16
    for lo in range(0, total, chunk):
        idx = np.arange(lo, min(total, lo + chunk))
        out[lo : lo + idx.size] = payoff.path_values(params, scenario_bits(idx, m, n))
    return out


def backward_induction_bounds(params: MarketParams, payoff: PayoffFn,
                              path_dependent: bool | None = None, tol: float = DEFAULT_TOL,
                              max_scenario_bits: int = DEFAULT_MAX_SCENARIO_BITS,
                              threads: int = 1, keep_measures: bool = True) -> BoundsSurface:
    """Fold per-node LP bounds back from the leaves to the root."""
    if path_dependent is None:
        path_dependent = payoff.path_dependent
    m, n = params.num_assets, params.num_steps
    R = params.growth_factor
    base = params.num_columns
    leaf = terminal_payoff_values(params, payoff, path_dependent, max_scenario_bits)
    upper = [None] * (n + 1)
    lower = [None] * (n + 1)
    argmax = [None] * n if keep_measures else None
    argmin = [None] * n if keep_measures else None
    upper[n] = leaf
    lower[n] = leaf.copy()
    for k in range(n - 1, -1, -1):
        if path_dependent:
            hi_obj = upper[k + 1].reshape(-1, base)
            lo_obj = lower[k + 1].reshape(-1, base)
        else:
            succ = successor_positions(m, k)
            hi_obj = upper[k + 1][succ]
            lo_obj = lower[k + 1][succ]
        hi, hi_pts = _fold(params, hi_obj, "max", tol, threads, keep_measures)
        lo, lo_pts = _fold(params, lo_obj, "min", tol, threads, keep_measures)
        upper[k] = hi / R
        lower[k] = lo / R
        if keep_measures:
            argmax[k] = hi_pts
            argmin[k] = lo_pts
    return BoundsSurface(params, path_dependent, lower, upper, argmax, argmin, "lp")


# ---------------------------------------------------------------------------
# product-measure closed forms


def vertex_measure(params: MarketParams, which: Which) -> Measure:
    """Single-step measure whose n-fold product attains the bound for supermodular claims.

    ``upper`` is the chain measure q*.  ``lower`` is q_* when sum(b) <= 1; for
    m = 2 it is the far endpoint Q(t_min) of the segment of martingale
    measures, which coincides with q_* whenever the latter exists.
    """
    upper, lower = extremal_measures(params)
    if which == "upper":
        return upper
    if params.num_assets == 1:
        return upper
    if params.num_assets == 2:
        return two_asset_interval(params).q_min
    if lower is None:
        b, _ = risk_neutral_weights(params)
        raise MassOverflow(
            f"sum(b) = {b.sum():.6g} > 1: the minimal measure is not a product for m > 2"
        )
    return lower


def _role(which: Which, submodular: bool) -> Which:
    if submodular:
        return "lower" if which == "upper" else "upper"
    return which


def compositions(h: int, parts: int) -> np.ndarray:
    """All (k_0, ..., k_{parts-1}) >= 0 with sum h, in lexicographic order."""
    return np.array(list(_compositions(h, parts)), dtype=np.int64).reshape(-1, parts)


def _compositions(h: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (h,)
        return
    for first in range(h + 1):
        for rest in _compositions(h - first, parts - 1):
            yield (first, *rest)


def _words(alphabet, length: int) -> np.ndarray:
    """All words over ``alphabet`` of the given length, shape (count, length)."""
    alphabet = list(alphabet)
    words = list(itertools.product(alphabet, repeat=length))
    return np.array(words, dtype=np.int64).reshape(len(words), length)


def _term_weight(counts: Sequence[int], masses: Sequence[float]) -> float:
    # factors are multiplied in sorted order so any permutation of the
    # (count, mass) pairs yields the same float
    factors = sorted(float(q) ** int(k) for k, q in zip(counts, masses) if k > 0)
    return float(multinomial(counts)) * math.prod(factors)


def _check_terms(count: int, cap: int) -> None:
    if count > cap:
        raise BudgetExceeded(f"{count} summands exceed the cap {cap}")


def product_expectation_terminal(params: MarketParams, payoff: PayoffFn, node: NodeId,
                                 q: Measure, max_terms: int = DEFAULT_MAX_TERMS) -> float:
    """Undiscounted E[X | node] under q^{(x)h}, grouping paths by their column counts."""
    support = q.support()
    h = params.num_steps - node.level
    _check_terms(math.comb(h + support.size - 1, support.size - 1), max_terms)
    comps = compositions(h, support.size)
    masses = q.weights[support]
    ups = np.asarray(node.up_counts) + comps @ column_bits(params.num_assets)[support]
    values = payoff.terminal_values(params, ups)
    weights = [_term_weight(c, masses) for c in comps.tolist()]
    return math.fsum(w * v for w, v in zip(weights, values.tolist()))


def product_expectation_path(params: MarketParams, payoff: PayoffFn,
                             prefix: Scenario | Sequence[Column], q: Measure,
                             max_terms: int = DEFAULT_MAX_TERMS) -> float:
    """Undiscounted E[X | prefix] under q^{(x)h}, summing over the support of q."""
    cols = prefix.columns if isinstance(prefix, Scenario) else tuple(prefix)
    m, n = params.num_assets, params.num_steps
    k = len(cols)
    if k > n:
        raise PrefixLevelMismatch(f"prefix of length {k} exceeds n = {n}")
    h = n - k
    support = q.support()
    _check_terms(support.size**h, max_terms)
    tails = _words(support, h)
    head = np.array([c.position for c in cols], dtype=np.int64)
    positions = np.hstack([np.broadcast_to(head, (tails.shape[0], k)), tails])
    values = payoff.path_values(params, column_bits(m)[positions])
    weights = np.prod(q.weights[tails], axis=1) if h else np.ones(1)
    return math.fsum((weights * values).tolist())


def product_bounds_path_dependent(params: MarketParams, payoff: PayoffFn,
                                  prefix: Scenario | Sequence[Column], which: Which,
                                  max_terms: int = DEFAULT_MAX_TERMS) -> float:
    """Bound at ``prefix`` for a fibrewise supermodular payoff (any payoff kind)."""
    cols = prefix.columns if isinstance(prefix, Scenario) else tuple(prefix)
    q = vertex_measure(params, which)
    h = params.num_steps - len(cols)
    return product_expectation_path(params, payoff, cols, q, max_terms) / params.growth_factor**h


def product_bounds_path_independent(params: MarketParams, payoff: PayoffFn, node: NodeId,
                                    which: Which, max_terms: int = DEFAULT_MAX_TERMS) -> float:
    """Bound at ``node`` for a fibrewise supermodular payoff of terminal prices."""
    q = vertex_measure(params, which)
    h = params.num_steps - node.level
    return product_expectation_terminal(params, payoff, node, q, max_terms) / params.growth_factor**h


def submodular_bounds(params: MarketParams, payoff: PayoffFn, where, which: Which,
                      max_terms: int = DEFAULT_MAX_TERMS) -> float:
    """Bound for a fibrewise submodular payoff: the two vertex measures swap roles."""
    q = vertex_measure(params, _role(which, submodular=True))
    if isinstance(where, NodeId):
        h = params.num_steps - where.level
        value = product_expectation_terminal(params, payoff, where, q, max_terms)
    else:
        cols = where.columns if isinstance(where, Scenario) else tuple(where)
        h = params.num_steps - len(cols)
        value = product_expectation_path(params, payoff, cols, q, max_terms)
    return value / params.growth_factor**h


def basket_bounds(params: MarketParams, weights, strike: float, node: NodeId,
                  kind: Literal["call", "put"], which: Which) -> float:
    """Basket call/put bound by the explicit multinomial formula.

    Upper: chain measure, asset i (in sorted order) is up in mu_j iff j >= i,
    so it has u_i + k_i + ... + k_m ups and d_i + k_0 + ... + k_{i-1} downs.
    Lower (sum b <= 1): singleton measure, asset i is up only in nu_i.
    For m = 2 with sum b > 1 the lower bound uses the Q(t_min) endpoint via
    the generic route.
    """
    payoff = (PayoffFn.basket_call if kind == "call" else PayoffFn.basket_put)(weights, strike)
    m, n = params.num_assets, params.num_steps
    b, order = risk_neutral_weights(params)
    h = n - node.level
    u_v = np.asarray(node.up_counts)
    d_v = np.asarray(node.down_counts)
    comps = compositions(h, m + 1)
    to_col = mask_to_column(m)
    if which == "upper" or m == 1:
        # mu_j has the j assets with the largest b up; in sorted order asset i
        # is up in mu_j iff j > i
        masks = np.concatenate([[0], np.cumsum(1 << order)])
        tail = np.cumsum(comps[:, ::-1], axis=1)[:, ::-1]  # k_i + ... + k_m
        sorted_ups = tail[:, 1:]
        ups = u_v + sorted_ups[:, np.argsort(order)]
        downs = d_v + (h - sorted_ups[:, np.argsort(order)])
        q = vertex_measure(params, "upper")
    elif b.sum() <= 1.0:
        masks = np.concatenate([[0], 1 << np.arange(m)])
        ups = u_v + comps[:, 1:]
        downs = d_v + (h - comps[:, 1:])
        q = vertex_measure(params, "lower")
    elif m == 2:
        return product_bounds_path_independent(params, payoff, node, "lower")
    else:
        raise MassOverflow(f"sum(b) = {b.sum():.6g} > 1: no product lower bound for m > 2")
    # masses are read from the same measure object the generic route uses
    masses = q.weights[to_col[masks]]
    prices = params.initial_prices * params.up**ups * params.down**downs
    values = payoff._apply(weighted_sum(prices, payoff.weights))
    terms = [_term_weight(c, masses) for c in comps.tolist()]
    return math.fsum(w * v for w, v in zip(terms, values.tolist())) / params.growth_factor**h


# ---------------------------------------------------------------------------
# whole-lattice closed forms


def closed_form_surface(params: MarketParams, payoff: PayoffFn, submodular: bool = False,
                        need_lower: bool = True, max_terms: int = DEFAULT_MAX_TERMS,
                        path_dependent: bool | None = None) -> BoundsSurface:
    """Product-measure bounds at every node (vectorised over each level).

    ``lower`` is left as NaN when ``need_lower`` is false.
    """
    if path_dependent is None:
        path_dependent = payoff.path_dependent
    m, n = params.num_assets, params.num_steps
    R = params.growth_factor
    q_hi = vertex_measure(params, _role("upper", submodular))
    q_lo = vertex_measure(params, _role("lower", submodular)) if need_lower else None
    bits = column_bits(m)
    upper, lower = [], []
    for k in range(n + 1):
        h = n - k
        res = []
        for q in (q_hi, q_lo):
            if q is None:
                res.append(None)
                continue
            support = q.support()
            if not path_dependent:
                _check_terms(math.comb(h + support.size - 1, support.size - 1), max_terms)
                comps = compositions(h, support.size)
                w = np.array([_term_weight(c, q.weights[support]) for c in comps.tolist()])
                grid = level_grid(m, k)
                ups = grid[:, None, :] + (comps @ bits[support])[None, :, :]
                vals = payoff.terminal_values(params, ups)
            else:
                count = params.num_columns**k
                _check_terms(count * support.size**h, max_terms)
                tails = _words(support, h)
                heads = _words(range(params.num_columns), k)
                pos = np.concatenate(
                    [np.repeat(heads, tails.shape[0], axis=0), np.tile(tails, (count, 1))], axis=1
                )
                vals = payoff.path_values(params, bits[pos].reshape(-1, n, m)).reshape(count, -1)
                w = np.prod(q.weights[tails], axis=1) if h else np.ones(1)
            res.append(vals @ w / R**h)
        upper.append(res[0])
        lower.append(res[1] if res[1] is not None else np.full_like(res[0], np.nan))
    return BoundsSurface(params, path_dependent, lower, upper, None, None, "closed")


def lower_product_available(params: MarketParams) -> bool:
    """Whether the minimal measure of supermodular claims is a product measure."""
    if params.num_assets <= 2:
        return True
    b, _ = risk_neutral_weights(params)
    try:
        lower_vertex_measure(b)
    except MassOverflow:
        return False
    return True


__all__ = [
    "BoundsSurface",
    "PriceInterval",
    "TwoAssetInterval",
    "backward_induction_bounds",
    "basket_bounds",
    "chain_column_positions",
    "closed_form_surface",
    "lower_product_available",
    "product_bounds_path_dependent",
    "product_bounds_path_independent",
    "single_step_bounds",
    "singleton_column_positions",
    "submodular_bounds",
    "two_asset_interval",
    "vertex_measure",
]
