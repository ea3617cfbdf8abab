"""Gated minimum-cost bipartite matching."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment


def min_cost_assignment(cost: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Plain rectangular assignment; returns matched (rows, cols)."""
    cost = np.asarray(cost, dtype=float)
    if cost.size == 0:
        return np.empty(0, dtype=int), np.empty(0, dtype=int)
    rows, cols = linear_sum_assignment(cost)
    return rows, cols


def solve(cost, gate: float):
    """Match rows to columns, never pairing entries with cost above ``gate``.

    Among all matchings that use only admissible pairs, the one with the
    most pairs is chosen first and the lowest total cost second.

    Returns ``(matches, unmatched_rows, unmatched_cols)`` with ``matches`` a
    list of ``(row, col)`` tuples sorted by row.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError("cost matrix must be two-dimensional")
    n_rows, n_cols = cost.shape
    if cost.size == 0:
        return [], list(range(n_rows)), list(range(n_cols))
    if not np.all(np.isfinite(cost)) or np.any(cost < 0):
        raise ValueError("costs must be finite and nonnegative")

    admissible = cost <= gate
    # sentinel must outweigh any sum of admissible costs so that cardinality wins
    sentinel = (min(n_rows, n_cols) + 1) * max(float(gate), float(cost[admissible].max(initial=0.0)), 1.0) + 1.0
    padded = np.where(admissible, cost, sentinel)
    rows, cols = min_cost_assignment(padded)

    matches = [(int(r), int(c)) for r, c in zip(rows, cols) if admissible[r, c]]
    matches.sort()
    matched_r = {r for r, _ in matches}
    matched_c = {c for _, c in matches}
    unmatched_rows = [r for r in range(n_rows) if r not in matched_r]
    unmatched_cols = [c for c in range(n_cols) if c not in matched_c]
    return matches, unmatched_rows, unmatched_cols
