"""Supermodularity on the Boolean lattice and the two extremal vertex measures.

Set functions are stored by subset bitmask: position ``mask`` holds f(S) for
S = {i : bit i of mask set}, so for m = 2 the order is (∅, {0}, {1}, {0,1}).
Measures use the column order of :mod:`multibinom.market_core`; the helpers
``mask_to_column`` and ``column_to_mask`` translate between the two.

Both vertex measures are built for a non-increasing ``b``.  Market-level
callers go through :func:`extremal_measures`, which sorts, builds and maps the
result back to the caller's asset order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BudgetExceeded, MassOverflow, NotSorted, OutOfRange
from .market_core import MarketParams, column_bits, level_grid, risk_neutral_weights
from .measures import Measure

DEFAULT_TOL = 1e-9
DEFAULT_MAX_FIBRE_BITS = 22


@lru_cache(maxsize=None)
def column_to_mask(m: int) -> np.ndarray:
    """``column_to_mask(m)[j-1]`` is the bitmask of column j."""
    return column_bits(m) @ (1 << np.arange(m))


@lru_cache(maxsize=None)
def mask_to_column(m: int) -> np.ndarray:
    return np.argsort(column_to_mask(m))


@dataclass(frozen=True)
class SetFunction:
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0 or v.size & (v.size - 1):
            raise ValueError(f"a set function needs 2**m values, got {v.size}")
        object.__setattr__(self, "values", v)

    @property
    def num_elements(self) -> int:
        return self.values.size.bit_length() - 1

    @classmethod
    def from_column_vector(cls, x) -> SetFunction:
        x = np.asarray(x, dtype=float)
        m = x.size.bit_length() - 1
        return cls(x[mask_to_column(m)])

    def column_vector(self) -> np.ndarray:
        return self.values[column_to_mask(self.num_elements)]

    def __call__(self, subset) -> float:
        return float(self.values[sum(1 << i for i in subset)])

    def __neg__(self) -> SetFunction:
        return SetFunction(-self.values)

    def __add__(self, other: SetFunction) -> SetFunction:
        return SetFunction(self.values + other.values)

    def expectation(self, q: Measure) -> float:
        terms = self.column_vector() * q.weights
        return math.fsum(terms[q.weights > 0])


@lru_cache(maxsize=None)
def _incomparable_pairs(m: int) -> tuple[np.ndarray, np.ndarray]:
    # comparable pairs satisfy the inequality with equality and are skipped
    masks = np.arange(1 << m)
    S, T = np.meshgrid(masks, masks, indexing="ij")
    keep = (S < T) & ((S & T) != S) & ((S & T) != T)
    return S[keep], T[keep]


def _slack(F: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Supermodularity slack f(S|T)+f(S&T)-f(S)-f(T) for rows of ``F`` (mask order)."""
    m = F.shape[-1].bit_length() - 1
    S, T = _incomparable_pairs(m)
    return F[..., S | T] + F[..., S & T] - F[..., S] - F[..., T], S, T


def supermodular_violation(f: SetFunction, tol: float = DEFAULT_TOL):
    """First pair (S, T) as bitmasks with slack below ``-tol``, or ``None``."""
    slack, S, T = _slack(f.values)
    bad = np.flatnonzero(slack < -tol)
    if bad.size == 0:
        return None
    return int(S[bad[0]]), int(T[bad[0]])


def is_supermodular(f: SetFunction, tol: float = DEFAULT_TOL) -> bool:
    return supermodular_violation(f, tol) is None


def is_submodular(f: SetFunction, tol: float = DEFAULT_TOL) -> bool:
    return is_supermodular(-f, tol)


def mask_members(mask: int) -> tuple[int, ...]:
    return tuple(i for i in range(mask.bit_length()) if mask >> i & 1)


# ---------------------------------------------------------------------------
# fibrewise checks


@dataclass(frozen=True)
class FibreWitness:
    """A fibre whose set function violates supermodularity.

    ``step`` is 1-based.  ``fixed`` lists the column positions (0-based, in
    column order) of every other step, or, for terminal payoffs, the up counts
    that the other steps contribute.  ``S`` and ``T`` are asset index tuples.
    """

    step: int
    fixed: tuple[int, ...]
    fixed_are_counts: bool
    S: tuple[int, ...]
    T: tuple[int, ...]
    values: tuple[float, ...]


def fibre_rows(payoff, params: MarketParams, max_bits: int = DEFAULT_MAX_FIBRE_BITS):
    """Yield ``(step, fixed, fixed_are_counts, F)`` with ``F`` the fibre set functions.

    Rows of ``F`` are in mask order.  Terminal payoffs are restricted to one
    representative step because every step sees the same family of fibres,
    indexed by the up counts of the remaining n-1 steps.
    """
    m, n = params.num_assets, params.num_steps
    to_col = mask_to_column(m)
    bits = column_bits(m)
    if not payoff.path_dependent:
        others = level_grid(m, n - 1)
        if others.shape[0] > 1 << max_bits:
            raise BudgetExceeded(f"{others.shape[0]} fibres exceed the cap 2**{max_bits}")
        ups = others[:, None, :] + bits[to_col][None, :, :]
        F = payoff.terminal_values(params, ups)
        yield n, others, True, F
        return
    if m * n > max_bits:
        raise BudgetExceeded(f"m*n = {m * n} exceeds the exhaustive-check cap {max_bits}")
    base = 1 << m
    total = base ** (n - 1)
    chunk = max(1, (1 << 16) // base)
    powers = base ** np.arange(n - 2, -1, -1, dtype=np.int64)
    for step in range(1, n + 1):
        for lo in range(0, total, chunk):
            flat = np.arange(lo, min(total, lo + chunk), dtype=np.int64)
            other = (flat[:, None] // powers) % base
            pos = np.empty((other.shape[0], base, n), dtype=np.int64)
            pos[:, :, : step - 1] = other[:, None, : step - 1]
            pos[:, :, step:] = other[:, None, step - 1 :]
            pos[:, :, step - 1] = to_col[None, :]
            F = payoff.path_values(params, bits[pos.reshape(-1, n)]).reshape(-1, base)
            yield step, other, False, F


def fibrewise_violation(payoff, params: MarketParams, tol: float = DEFAULT_TOL,
                        max_bits: int = DEFAULT_MAX_FIBRE_BITS, negate: bool = False):
    """First fibre violating supermodularity (of ``-X`` when ``negate``), or ``None``."""
    sign = -1.0 if negate else 1.0
    for step, fixed, are_counts, F in fibre_rows(payoff, params, max_bits):
        chunk = max(1, (1 << 22) // max(1, F.shape[1] ** 2))
        for lo in range(0, F.shape[0], chunk):
            block = sign * F[lo : lo + chunk]
            slack, S, T = _slack(block)
            bad = np.argwhere(slack < -tol)
            if bad.size:
                r, c = bad[0]
                return FibreWitness(
                    step,
                    tuple(int(v) for v in fixed[lo + r]),
                    are_counts,
                    mask_members(int(S[c])),
                    mask_members(int(T[c])),
                    tuple(float(v) for v in F[lo + r]),
                )
    return None


def is_fibrewise_supermodular(payoff, params: MarketParams, tol: float = DEFAULT_TOL,
                              max_bits: int = DEFAULT_MAX_FIBRE_BITS) -> bool:
    """Exhaustive check that every one-step restriction of the payoff is supermodular."""
    return fibrewise_violation(payoff, params, tol, max_bits) is None


# ---------------------------------------------------------------------------
# vertex measures


def _check_b(b, sorted_required: bool) -> np.ndarray:
    b = np.asarray(b, dtype=float).ravel()
    if ((b < 0) | (b > 1)).any():
        raise OutOfRange(f"entries of b must lie in [0, 1], got {b}")
    if sorted_required and (np.diff(b) > 0).any():
        raise NotSorted(f"b must be non-increasing, got {b}")
    return b


def chain_column_positions(m: int) -> np.ndarray:
    """Column positions of mu_0 ⊂ mu_1 ⊂ ... ⊂ mu_m (mu_i = first i assets up)."""
    masks = (1 << np.arange(m + 1)) - 1
    return mask_to_column(m)[masks]


def singleton_column_positions(m: int) -> np.ndarray:
    """Column positions of nu_0 = ∅ and nu_i = {i-th asset}, i = 1..m."""
    masks = np.concatenate([[0], 1 << np.arange(m)])
    return mask_to_column(m)[masks]


def chain_masses(b) -> np.ndarray:
    b = _check_b(b, sorted_required=True)
    padded = np.concatenate([[1.0], b, [0.0]])
    return padded[:-1] - padded[1:]


def upper_vertex_measure(b) -> Measure:
    """Mass b_i - b_{i+1} on mu_i (b_0 = 1, b_{m+1} = 0)."""
    masses = chain_masses(b)
    m = masses.size - 1
    w = np.zeros(1 << m)
    w[chain_column_positions(m)] = masses
    return Measure(w)


def lower_vertex_measure(b) -> Measure:
    """Mass b_i on the singleton of asset i and 1 - sum(b) on the all-down column."""
    b = _check_b(b, sorted_required=False)
    rest = 1.0 - b.sum()
    if rest < -DEFAULT_TOL:
        raise MassOverflow(f"sum(b) = {b.sum()} > 1, the lower vertex measure does not exist")
    m = b.size
    w = np.zeros(1 << m)
    w[singleton_column_positions(m)] = np.concatenate([[max(rest, 0.0)], b])
    return Measure(w)


def lovasz_value(f: SetFunction, b) -> float:
    """Lovász-extension value sum_i lambda_i f(mu_i) at a sorted ``b``; equals E_{q*}(f)."""
    masses = chain_masses(b)
    m = masses.size - 1
    masks = (1 << np.arange(m + 1)) - 1
    terms = masses * f.values[masks]
    return math.fsum(terms[masses > 0])


def permute_assets(q: Measure, order: np.ndarray) -> Measure:
    """Map a measure built for assets ``order[0], order[1], ...`` back to natural order."""
    m = q.num_assets
    bits = column_bits(m)
    natural_masks = bits[:, np.argsort(order)] @ (1 << np.arange(m))
    w = np.zeros(1 << m)
    w[mask_to_column(m)[natural_masks]] = q.weights
    return Measure(w)


def extremal_measures(params: MarketParams) -> tuple[Measure, Measure | None]:
    """Upper and (if it exists) lower supermodular vertex measures in user asset order."""
    b, order = risk_neutral_weights(params)
    upper = permute_assets(upper_vertex_measure(b[order]), order)
    try:
        lower = lower_vertex_measure(b)
    except MassOverflow:
        lower = None
    return upper, lower
