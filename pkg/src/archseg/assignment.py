"""Minimum-cost one-to-one assignment (Kuhn-Munkres).

Shortest-augmenting-path formulation with row/column potentials, handling
rectangular R x C matrices with R <= C directly.  Deterministic: on ties the
lowest column index is preferred at every step, so identical inputs always
produce identical assignments.
"""

from __future__ import annotations

import numpy as np


def hungarian_assign(cost) -> tuple[np.ndarray, float]:
    """Assign each row to a distinct column minimizing total cost.

    Returns (assignment, total_cost) where assignment[i] is the column given
    to row i.  Requires R <= C and finite entries.
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2:
        raise ValueError(f"cost must be 2-D, got shape {c.shape}")
    n_rows, n_cols = c.shape
    if n_rows > n_cols:
        raise ValueError(f"more rows than columns ({n_rows} > {n_cols})")
    if not np.isfinite(c).all():
        raise ValueError("cost matrix contains non-finite entries")

    u = np.zeros(n_rows)
    v = np.zeros(n_cols)
    # row_of[j] = row currently assigned to column j; slot n_cols is virtual.
    row_of = np.full(n_cols + 1, -1, dtype=np.intp)

    for i in range(n_rows):
        row_of[n_cols] = i
        j0 = n_cols
        minv = np.full(n_cols, np.inf)
        way = np.full(n_cols, -1, dtype=np.intp)
        used = np.zeros(n_cols + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row_of[j0]
            free = ~used[:n_cols]
            reduced = c[i0] - u[i0] - v
            improved = free & (reduced < minv)
            minv[improved] = reduced[improved]
            way[improved] = j0
            masked = np.where(free, minv, np.inf)
            j1 = int(np.argmin(masked))  # first index on ties
            delta = masked[j1]
            used_cols = np.flatnonzero(used[:n_cols])
            u[row_of[used_cols]] += delta
            u[i] += delta  # row reached through the virtual column
            v[used_cols] -= delta
            minv[free] -= delta
            j0 = j1
            if row_of[j0] == -1:
                break
        # Augment along the alternating path back to the virtual column.
        while j0 != n_cols:
            j1 = way[j0]
            row_of[j0] = row_of[j1]
            j0 = j1

    assignment = np.full(n_rows, -1, dtype=np.intp)
    for j in range(n_cols):
        if row_of[j] >= 0:
            assignment[row_of[j]] = j
    total = float(c[np.arange(n_rows), assignment].sum())
    return assignment, total


def brute_force_assign(cost):
    """Exhaustive-permutation oracle for small instances.

    Returns (assignment, total) like hungarian_assign; intended only as a
    test reference, cost grows factorially.
    """
    from itertools import permutations

    c = np.asarray(cost, dtype=np.float64)
    n_rows, n_cols = c.shape
    best = np.inf
    best_perm = None
    rows = np.arange(n_rows)
    for perm in permutations(range(n_cols), n_rows):
        total = c[rows, list(perm)].sum()
        if total < best:
            best = total
            best_perm = perm
    return np.asarray(best_perm, dtype=np.intp), float(best)
