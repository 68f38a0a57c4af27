"""Exact integral channel allocation by branch and bound.

Solves the integer program behind the auction exactly, for oracle-scale
instances (n up to roughly 12). Branches on (request, channel) assignment in
request order, channels first, skipping the request last; prunes with the
suffix sum of positive weights. Ties resolve toward lower request id, then
lower channel id, by exploration order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .lp import POSITIVE_TOL
from .model import AuctionInstance, ConflictStructure, build_conflict_structure

__all__ = ["ExactAllocation", "BudgetExceededError", "solve_ip_exact"]


class BudgetExceededError(RuntimeError):
    """The search tree outgrew the configured node budget."""


@dataclass
class ExactAllocation:
    """A maximum-weight integral allocation: per-request channel (or None),
    each winner's slice indices on its channel, and the total weight."""

    assignment: list[Optional[int]]
    schedule: dict[int, list[int]]
    weight: float


def _winner_schedule(
    structure: ConflictStructure, assignment: Sequence[Optional[int]]
) -> dict[int, list[int]]:
    # Fixed windows force the slice placement: a winner occupies exactly the
    # slices covering its window.
    return {
        i: list(structure.window_slices(i, j))
        for i, j in enumerate(assignment)
        if j is not None
    }


class _SearchState:
    """Incremental feasibility for the integer program's per-slice rows.

    For each (channel, slice), tracks the winners covering it and, for every
    request present there, how many of its conflict neighbours are among
    those winners. A new winner is admissible when it conflicts with no
    covering winner and pushes no present request's neighbour count past one.
    """

    def __init__(self, instance: AuctionInstance, structure: ConflictStructure):
        self.structure = structure
        self.conflict = structure.conflict
        n, m = instance.n, instance.m
        self.present: list[list[np.ndarray]] = []
        self.neighbour_count: list[np.ndarray] = []
        self.covering: list[list[list[int]]] = []
        for j in range(m):
            n_slices = len(structure.slices[j])
            pres: list[np.ndarray] = [np.empty(0, dtype=int)] * n_slices
            members: list[list[int]] = [[] for _ in range(n_slices)]
            for i in range(n):
                for l in structure.window_slices(i, j):
                    members[l].append(i)
            for l in range(n_slices):
                pres[l] = np.array(members[l], dtype=int)
            self.present.append(pres)
            self.neighbour_count.append(np.zeros((n_slices, n), dtype=int))
            self.covering.append([[] for _ in range(n_slices)])

    def can_place(self, i: int, j: int) -> bool:
        y = self.conflict
        for l in self.structure.window_slices(i, j):
            for w in self.covering[j][l]:
                if y[i, w, j]:
                    return False
            counts = self.neighbour_count[j][l]
            for t in self.present[j][l]:
                if y[t, i, j] and counts[t] >= 1:
                    return False
        return True

    def place(self, i: int, j: int) -> None:
        y = self.conflict
        for l in self.structure.window_slices(i, j):
            self.covering[j][l].append(i)
            counts = self.neighbour_count[j][l]
            for t in self.present[j][l]:
                if y[t, i, j]:
                    counts[t] += 1

    def remove(self, i: int, j: int) -> None:
        y = self.conflict
        for l in self.structure.window_slices(i, j):
            self.covering[j][l].remove(i)
            counts = self.neighbour_count[j][l]
            for t in self.present[j][l]:
                if y[t, i, j]:
                    counts[t] -= 1


def solve_ip_exact(
    instance: AuctionInstance,
    weights: Sequence[float],
    *,
    structure: Optional[ConflictStructure] = None,
    node_budget: int = 5_000_000,
) -> ExactAllocation:
    """Maximum-weight feasible integral allocation, by exhaustive search.

    ``weights`` are the per-request (virtual) bids being maximized. Raises
    BudgetExceededError when the instance exceeds ``node_budget`` search
    nodes; intended for oracle-scale inputs.
    """
    n, m = instance.n, instance.m
    w = np.asarray(weights, dtype=float)
    if len(w) != n:
        raise ValueError(f"{len(w)} weights for {n} requests")
    if structure is None:
        structure = build_conflict_structure(instance)
    state = _SearchState(instance, structure)

    eligible = [
        [j for j in range(m) if structure.location[i, j]] if w[i] > POSITIVE_TOL else []
        for i in range(n)
    ]
    # suffix_gain[i] bounds what requests i..n-1 can still add.
    suffix_gain = np.zeros(n + 1)
    for i in range(n - 1, -1, -1):
        suffix_gain[i] = suffix_gain[i + 1] + (w[i] if eligible[i] else 0.0)

    best_weight = -np.inf
    best_assignment: list[Optional[int]] = [None] * n
    assignment: list[Optional[int]] = [None] * n
    nodes = 0

    def descend(i: int, current: float) -> None:
        nonlocal nodes, best_weight, best_assignment
        nodes += 1
        if nodes > node_budget:
            raise BudgetExceededError(
                f"exceeded {node_budget} nodes at {n} requests x {m} channels"
            )
        if i == n:
            if current > best_weight + 1e-12:
                best_weight = current
                best_assignment = assignment.copy()
            return
        if current + suffix_gain[i] <= best_weight + 1e-12:
            return
        for j in eligible[i]:
            if state.can_place(i, j):
                state.place(i, j)
                assignment[i] = j
                descend(i + 1, current + w[i])
                assignment[i] = None
                state.remove(i, j)
        descend(i + 1, current)

    descend(0, 0.0)
    if not np.isfinite(best_weight):
        best_weight = 0.0
    return ExactAllocation(
        assignment=best_assignment,
        schedule=_winner_schedule(structure, best_assignment),
        weight=float(best_weight),
    )
