"""Greedy channel allocation with preemption, and its critical values.

Requests are scanned by descending per-unit-time virtual price. A request is
accepted on the first feasible channel where it is conflict-free; otherwise
it may preempt a channel's conflicting winners when their total virtual bid
is strictly below its own, after which earlier-ranked requests freed by the
preemption are re-admitted to that channel. Critical values come from an
exact search over the finitely many bid thresholds the scan compares
against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .model import AuctionInstance, ConflictStructure, build_conflict_structure
from .relaxation import IntegralAllocation, _schedule_for

__all__ = ["RequestStatus", "GreedyState", "mgca_allocate", "mgca_critical_values"]


class RequestStatus(Enum):
    UNSEEN = "unseen"
    ALLOCATED = "allocated"
    REJECTED = "rejected"
    PREEMPTED = "preempted"


@dataclass
class GreedyState:
    """Scan order, per-channel occupancy, and per-request status."""

    order: list[int]
    occupancy: list[list[int]]
    status: list[RequestStatus]


def _unit_price_order(instance: AuctionInstance, phi: np.ndarray) -> list[int]:
    # Descending bid per minute; ties by higher bid, then lower id.
    def key(i: int):
        t = instance.requests[i].duration
        return (-phi[i] / t, -phi[i], instance.requests[i].id)

    return sorted(range(instance.n), key=key)


def _run(
    instance: AuctionInstance,
    structure: ConflictStructure,
    phi: np.ndarray,
    focus: Optional[int] = None,
    thresholds: Optional[list[float]] = None,
) -> GreedyState:
    """One greedy scan. With ``focus`` set, records every bid value of that
    request at which some comparison made along this run would flip."""
    n, m = instance.n, instance.m
    y = structure.conflict
    order = _unit_price_order(instance, phi)
    occupancy: list[list[int]] = [[] for _ in range(m)]
    status = [RequestStatus.UNSEEN] * n
    channel_of: list[Optional[int]] = [None] * n

    def place(i: int, j: int) -> None:
        occupancy[j].append(i)
        channel_of[i] = j
        status[i] = RequestStatus.ALLOCATED

    for pos, i in enumerate(order):
        placed = False
        for j in range(m):
            if not structure.location[i, j]:
                continue
            if not any(y[i, k, j] for k in occupancy[j]):
                place(i, j)
                placed = True
                break
        if placed:
            continue
        for j in range(m):
            if not structure.location[i, j]:
                continue
            blockers = [k for k in occupancy[j] if y[i, k, j]]
            total = float(phi[blockers].sum())
            if thresholds is not None:
                if i == focus:
                    thresholds.append(total)
                elif focus in blockers:
                    thresholds.append(phi[i] - (total - phi[focus]))
            if total < phi[i]:
                for k in blockers:
                    occupancy[j].remove(k)
                    channel_of[k] = None
                    status[k] = RequestStatus.PREEMPTED
                place(i, j)
                for k in order[:pos]:
                    if channel_of[k] is None and structure.location[k, j]:
                        if not any(y[k, w, j] for w in occupancy[j]):
                            place(k, j)
                placed = True
                break
        if not placed:
            status[i] = RequestStatus.REJECTED
    return GreedyState(order=order, occupancy=occupancy, status=status)


def _assignment(state: GreedyState, n: int) -> list[Optional[int]]:
    out: list[Optional[int]] = [None] * n
    for j, members in enumerate(state.occupancy):
        for i in members:
            out[i] = j
    return out


def mgca_allocate(
    instance: AuctionInstance,
    virtual_bids: Sequence[float],
    *,
    structure: Optional[ConflictStructure] = None,
) -> IntegralAllocation:
    """Greedy allocation by per-unit price with preemption and re-admission."""
    if structure is None:
        structure = build_conflict_structure(instance)
    phi = np.asarray(virtual_bids, dtype=float)
    state = _run(instance, structure, phi)
    assignment = _assignment(state, instance.n)
    weight = float(sum(phi[i] for i, j in enumerate(assignment) if j is not None))
    return IntegralAllocation(assignment, _schedule_for(structure, assignment), weight)


def _wins_at(
    instance: AuctionInstance,
    structure: ConflictStructure,
    phi: np.ndarray,
    i: int,
    value: float,
) -> tuple[bool, list[float]]:
    probe = phi.copy()
    probe[i] = value
    collected: list[float] = []
    state = _run(instance, structure, probe, focus=i, thresholds=collected)
    return _assignment(state, instance.n)[i] is not None, collected


def mgca_critical_values(
    instance: AuctionInstance,
    virtual_bids: Sequence[float],
    *,
    structure: Optional[ConflictStructure] = None,
    winners: Optional[Sequence[int]] = None,
) -> dict[int, float]:
    """Exact critical virtual bid for each winner, others held fixed.

    The scan's outcome, as a function of one request's bid, only changes
    where a comparison flips: at rank crossings of the per-unit-price order,
    at the total conflicting bid the request must beat to enter a channel,
    or at the bid below which an incoming request preempts it. The search
    probes interval midpoints, collects the thresholds realized along each
    probed run, and narrows to the exact transition value.
    """
    if structure is None:
        structure = build_conflict_structure(instance)
    phi = np.asarray(virtual_bids, dtype=float)
    if winners is None:
        winners = mgca_allocate(instance, virtual_bids, structure=structure).winners()

    out: dict[int, float] = {}
    for i in winners:
        t_i = instance.requests[i].duration
        rank_cross = sorted(
            {
                phi[k] * t_i / instance.requests[k].duration
                for k in range(instance.n)
                if k != i
            }
        )
        wins0, _ = _wins_at(instance, structure, phi, i, 0.0)
        if wins0:
            out[i] = 0.0
            continue
        lo, hi = 0.0, float(phi[i])
        # Invariant: the run loses at lo (and just above, once certified) and
        # wins at hi and just above.
        while True:
            if hi - lo <= 1e-12:
                out[i] = hi
                break
            probe = 0.5 * (lo + hi)
            won, collected = _wins_at(instance, structure, phi, i, probe)
            limits = [t for t in collected + rank_cross if lo < t < hi]
            below = [t for t in limits if t < probe]
            above = [t for t in limits if t > probe]
            if won:
                # Same outcome holds down to the nearest threshold below.
                if not below:
                    out[i] = lo
                    break
                hi = max(below)
            else:
                if not above:
                    out[i] = hi
                    break
                lo = min(above)
        out[i] = max(out[i], 0.0)
    return out
