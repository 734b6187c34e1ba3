"""Small dense linear programs: optimise c.x subject to A x = d, x >= 0.

The solver is a tableau primal simplex with Bland's rule (lowest-index
entering column, lowest-index basic variable among tied leaving rows), so a
given input always produces the same vertex.  Problems here are tiny (a few
dozen equality rows at most), so the tableau is recomputed from the basis
inverse whenever a warm start is supplied.

``SimplexSolver`` caches the constraint system.  Its ``solve_batch`` method
prices many objectives against one polytope: every known optimal basis is
tested for all pending objectives at once, and only the objectives that no
known basis certifies are pivoted individually.
"""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import BudgetExceeded, DimensionMismatch, Infeasible, Unbounded

Sense = Literal["max", "min"]

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class LpProblem:
    objective: np.ndarray
    constraint_matrix: np.ndarray
    rhs: np.ndarray
    sense: Sense = "max"

    def __post_init__(self) -> None:
        A = np.atleast_2d(np.asarray(self.constraint_matrix, dtype=float))
        c = np.asarray(self.objective, dtype=float).ravel()
        d = np.asarray(self.rhs, dtype=float).ravel()
        if A.shape != (d.size, c.size):
            raise DimensionMismatch(f"A is {A.shape}, c has {c.size} entries, d has {d.size}")
        if self.sense not in ("max", "min"):
            raise ValueError(f"sense must be 'max' or 'min', got {self.sense!r}")
        object.__setattr__(self, "constraint_matrix", A)
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "rhs", d)


@dataclass(frozen=True)
class LpSolution:
    value: float
    point: np.ndarray
    basis: tuple[int, ...]


def independent_rows(A: np.ndarray, d: np.ndarray, tol: float) -> np.ndarray:
    """Indices of a maximal set of linearly independent rows of A.

    Raises ``Infeasible`` when a dependent row of A carries an inconsistent
    right-hand side.
    """
    scale = max(1.0, float(np.abs(A).max(initial=0.0)))
    aug = np.hstack([A, d[:, None]])
    kept: list[int] = []
    q_rows: list[np.ndarray] = []  # orthonormal basis of the kept rows of A
    q_aug: list[np.ndarray] = []  # ... and of the augmented rows
    for i in range(A.shape[0]):
        r = A[i].copy()
        ra = aug[i].copy()
        for q in q_rows:
            r -= (q @ r) * q
        for q in q_aug:
            ra -= (q @ ra) * q
        nr, na = np.linalg.norm(r), np.linalg.norm(ra)
        if nr > tol * scale * 1e3:
            kept.append(i)
            q_rows.append(r / nr)
            q_aug.append(ra / na)
        elif na > 1e3 * tol * max(scale, float(np.abs(d).max(initial=0.0)), 1.0):
            raise Infeasible(f"row {i} is a combination of earlier rows with a different rhs")
    return np.array(kept, dtype=np.int64)


class SimplexSolver:
    """Reusable solver for one equality system ``A x = d, x >= 0``."""

    def __init__(self, A, d, tol: float = DEFAULT_TOL):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        d = np.asarray(d, dtype=float).ravel()
        if A.shape[0] != d.size:
            raise DimensionMismatch(f"A has {A.shape[0]} rows but d has {d.size} entries")
        self.tol = tol
        rows = independent_rows(A, d, tol)
        self.A = A[rows]
        self.d = d[rows]
        self.num_rows, self.num_cols = self.A.shape
        self._start: tuple[int, ...] | None = None
        self._factor_cache: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]] = {}

    # -- tableau primitives -------------------------------------------------

    def _factor(self, basis: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
        hit = self._factor_cache.get(basis)
        if hit is None:
            binv = np.linalg.inv(self.A[:, basis])
            xb = binv @ self.d
            xb[np.abs(xb) < self.tol] = 0.0
            hit = (binv, xb)
            if len(self._factor_cache) < 4096:
                self._factor_cache[basis] = hit
        return hit

    def _tableau(self, basis: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
        binv, xb = self._factor(basis)
        return binv @ self.A, xb.copy()

    @staticmethod
    def _pivot(T: np.ndarray, rhs: np.ndarray, row: int, col: int) -> None:
        piv = T[row, col]
        T[row] /= piv
        rhs[row] /= piv
        factors = T[:, col].copy()
        factors[row] = 0.0
        T -= np.outer(factors, T[row])
        rhs -= factors * rhs[row]
        T[:, col] = 0.0
        T[row, col] = 1.0

    def _leaving_row(self, T, rhs, basis, col) -> int | None:
        column = T[:, col]
        eligible = np.flatnonzero(column > self.tol)
        if eligible.size == 0:
            return None
        ratios = np.maximum(rhs[eligible], 0.0) / column[eligible]
        best = ratios.min()
        tied = eligible[ratios <= best + self.tol * max(1.0, abs(best))]
        return int(min(tied, key=lambda r: basis[r]))

    def _run(self, T, rhs, basis: list[int], cost: np.ndarray, allowed: int) -> None:
        """Bland-rule maximisation of ``cost`` from a feasible tableau (in place)."""
        max_iter = 50 * (self.num_cols + self.num_rows) + 1000
        for _ in range(max_iter):
            reduced = cost[:allowed] - cost[basis] @ T[:, :allowed]
            entering = np.flatnonzero(reduced > self.tol)
            if entering.size == 0:
                return
            col = int(entering[0])
            row = self._leaving_row(T, rhs, basis, col)
            if row is None:
                raise Unbounded("objective is unbounded over the feasible set")
            self._pivot(T, rhs, row, col)
            basis[row] = col
        raise RuntimeError("simplex iteration limit reached")  # pragma: no cover

    # -- phase one ----------------------------------------------------------

    def feasible_basis(self) -> tuple[int, ...]:
        """A feasible basis found with artificial variables (cached)."""
        if self._start is not None:
            return self._start
        r, n = self.num_rows, self.num_cols
        sign = np.where(self.d < 0, -1.0, 1.0)
        T = np.hstack([self.A * sign[:, None], np.eye(r)])
        rhs = self.d * sign
        basis = list(range(n, n + r))
        cost = np.concatenate([np.zeros(n), -np.ones(r)])
        self._run(T, rhs, basis, cost, n + r)
        if rhs[[i for i, b in enumerate(basis) if b >= n]].sum() > self.tol * max(1.0, r):
            raise Infeasible("no x >= 0 satisfies A x = d")
        # drive remaining (zero-level) artificials out of the basis
        for i, b in enumerate(basis):
            if b >= n:
                candidates = np.flatnonzero(np.abs(T[i, :n]) > self.tol)
                candidates = [c for c in candidates if c not in basis]
                if not candidates:  # pragma: no cover - rows are independent
                    raise Infeasible("degenerate constraint system")
                self._pivot(T, rhs, i, int(candidates[0]))
                basis[i] = int(candidates[0])
        self._start = tuple(sorted(basis))
        return self._start

    # -- public solve -------------------------------------------------------

    def solve(self, c, sense: Sense = "max", basis: tuple[int, ...] | None = None) -> LpSolution:
        c = np.asarray(c, dtype=float).ravel()
        if c.size != self.num_cols:
            raise DimensionMismatch(f"objective has {c.size} entries, expected {self.num_cols}")
        start = tuple(sorted(basis)) if basis is not None else self.feasible_basis()
        T, rhs = self._tableau(start)
        order = list(start)
        cost = c if sense == "max" else -c
        self._run(T, rhs, order, cost, self.num_cols)
        x = np.zeros(self.num_cols)
        x[order] = np.maximum(rhs, 0.0)
        return LpSolution(float(c @ x), x, tuple(sorted(order)))

    def solve_batch(self, C, sense: Sense = "max", basis: tuple[int, ...] | None = None):
        """Optimise every row of ``C``; returns ``(values, points, bases)``.

        ``bases`` is a list of optimal bases and ``points`` rows are the
        corresponding vertices.  Values are the objective at those vertices.
        """
        C = np.atleast_2d(np.asarray(C, dtype=float))
        count = C.shape[0]
        values = np.empty(count)
        points = np.zeros((count, self.num_cols))
        which = np.full(count, -1)
        known: list[tuple[int, ...]] = [tuple(sorted(basis)) if basis else self.feasible_basis()]
        pending = np.arange(count)
        sgn = 1.0 if sense == "max" else -1.0
        tested = 0
        while pending.size:
            while tested < len(known) and pending.size:
                B = known[tested]
                binv, xb = self._factor(B)
                sub = C[pending] * sgn
                reduced = sub - (sub[:, B] @ binv) @ self.A
                ok = (reduced <= self.tol).all(axis=1)
                which[pending[ok]] = tested
                pending = pending[~ok]
                tested += 1
            if not pending.size:
                break
            sol = self.solve(C[pending[0]], sense, basis=known[0])
            if sol.basis in known:  # certified by a known basis only up to tolerance
                which[pending[0]] = known.index(sol.basis)
                pending = pending[1:]
            else:
                known.append(sol.basis)
        for k, B in enumerate(known):
            rows = np.flatnonzero(which == k)
            if rows.size:
                _, xb = self._factor(B)
                points[np.ix_(rows, B)] = np.maximum(xb, 0.0)
        values[:] = np.einsum("ij,ij->i", C, points)
        return values, points, [known[w] for w in which]


def solve(problem: LpProblem, tol: float = DEFAULT_TOL) -> LpSolution:
    solver = SimplexSolver(problem.constraint_matrix, problem.rhs, tol)
    return solver.solve(problem.objective, problem.sense)


def enumerate_vertices(A, d, tol: float = DEFAULT_TOL, max_vertices: int = 100_000,
                       max_bases: int | None = None,
                       max_seconds: float | None = None) -> list[np.ndarray]:
    """All vertices of ``{x >= 0 : A x = d}`` by search over adjacent feasible bases.

    Vertices are deduplicated after rounding to ``tol`` and returned in
    lexicographic order of their coordinates.  ``BudgetExceeded`` is raised
    once more than ``max_vertices`` vertices (or ``max_bases`` bases) appear,
    or when the search runs longer than ``max_seconds``.
    """
    deadline = None if max_seconds is None else time.monotonic() + max_seconds
    solver = SimplexSolver(A, d, tol)
    if max_bases is None:
        max_bases = 20 * max_vertices
    start = solver.feasible_basis()
    seen = {start}
    queue = deque([start])
    vertices: dict[tuple, np.ndarray] = {}
    digits = max(0, int(-np.log10(tol)) - 1)
    while queue:
        basis = queue.popleft()
        if deadline is not None and time.monotonic() > deadline:
            raise BudgetExceeded(
                f"vertex search exceeded {max_seconds} s ({len(vertices)} vertices so far)"
            )
        T, rhs = solver._tableau(basis)
        x = np.zeros(solver.num_cols)
        x[list(basis)] = np.maximum(rhs, 0.0)
        key = tuple(np.round(x, digits) + 0.0)
        if key not in vertices:
            vertices[key] = x
            if len(vertices) > max_vertices:
                raise BudgetExceeded(f"polytope has more than {max_vertices} vertices")
        in_basis = set(basis)
        blist = list(basis)
        for col in range(solver.num_cols):
            if col in in_basis:
                continue
            column = T[:, col]
            eligible = np.flatnonzero(column > tol)
            if eligible.size == 0:
                continue
            ratios = np.maximum(rhs[eligible], 0.0) / column[eligible]
            best = ratios.min()
            for row in eligible[ratios <= best + tol * max(1.0, abs(best))]:
                nb = blist.copy()
                nb[row] = col
                nb = tuple(sorted(nb))
                if nb not in seen:
                    seen.add(nb)
                    if len(seen) > max_bases:
                        raise BudgetExceeded(f"more than {max_bases} feasible bases visited")
                    queue.append(nb)
    return [vertices[k] for k in sorted(vertices)]
