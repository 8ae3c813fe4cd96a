"""Bipartite matching between existing tracks (rows) and incoming tracklets
(columns).

Cost matrices hold negative similarities; pairs that must never match carry
the GATED sentinel (+inf). hungarian_solve returns the minimum-total-cost
matching among all maximal matchings restricted to non-GATED entries, which
for the all-finite square case is the classic assignment optimum.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import linear_sum_assignment

GATED = float("inf")

Assignment = list[tuple[int, int]]


def _as_cost(cost) -> np.ndarray:
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
        raise ValueError(f"cost matrix must be 2D and nonempty, got shape {c.shape}")
    if np.isnan(c).any() or (c == -np.inf).any():
        raise ValueError("cost entries must be finite or GATED (+inf)")
    return c


def hungarian_solve(cost) -> tuple[Assignment, float]:
    """Exact minimum-cost matching; returns (pairs sorted by row, total cost).

    Rows or columns whose entries are all GATED stay unmatched. Finite costs
    are shifted so their maximum is <= 0 before augmenting with zero-cost
    dummy escapes, which makes the solution the cheapest maximal matching on
    the non-gated graph and keeps the argmin invariant under constant shifts
    of all-finite square matrices.
    """
    c = _as_cost(cost)
    n, m = c.shape
    finite = np.isfinite(c)
    if not finite.any():
        return [], 0.0

    shift = max(float(c[finite].max()), 0.0)
    span = float(c[finite].max() - c[finite].min()) + 1.0
    padded = np.zeros((n + m, n + m))
    padded[:n, :m] = np.where(finite, c - shift, span)

    rows, cols = linear_sum_assignment(padded)
    pairs = [(int(r), int(col)) for r, col in zip(rows, cols)
             if r < n and col < m and finite[r, col]]
    pairs.sort()
    total = math.fsum(c[r, col] for r, col in pairs)
    return pairs, total


def greedy_match(cost) -> Assignment:
    """Repeatedly take the cheapest remaining non-GATED entry, retiring its
    row and column; ties resolve to the lowest (row, col)."""
    c = _as_cost(cost).copy()
    n, m = c.shape
    pairs: Assignment = []
    row_free = np.ones(n, bool)
    col_free = np.ones(m, bool)
    while row_free.any() and col_free.any():
        sub = c[np.ix_(row_free, col_free)]
        if not np.isfinite(sub).any():
            break
        flat = int(sub.argmin())  # argmin returns the first (lexicographic) min
        i, j = divmod(flat, sub.shape[1])
        r = int(np.flatnonzero(row_free)[i])
        col = int(np.flatnonzero(col_free)[j])
        pairs.append((r, col))
        row_free[r] = False
        col_free[col] = False
    pairs.sort()
    return pairs
