"""Shared helpers: tiny instance builders and brute-force oracles."""

from __future__ import annotations

import itertools
from typing import Optional, Sequence

import numpy as np
import pytest

from spectrumauction.model import (
    AuctionInstance,
    Channel,
    ConflictStructure,
    Disk,
    GeometryMode,
    Request,
    build_conflict_structure,
)


def make_instance(
    requests: Sequence[tuple],
    channels: Sequence[tuple] = ((30.0, (50.0, 50.0), 80.0),),
    horizon: int = 60,
    mode: GeometryMode = GeometryMode.POINT,
) -> AuctionInstance:
    """Compact builder.

    requests: (x, y, bid, arrival, duration) or (x, y, bid, arrival, duration, valuation)
    channels: (interference_radius, center, license_radius)
    """
    chans = tuple(
        Channel(id=j, interference_radius=r, license_areas=(Disk(center=c, radius=lr),))
        for j, (r, c, lr) in enumerate(channels)
    )
    reqs = []
    for i, spec in enumerate(requests):
        x, y, bid, arrival, duration = spec[:5]
        valuation = spec[5] if len(spec) > 5 else bid
        reqs.append(
            Request(
                id=i,
                location=(float(x), float(y)),
                bid=float(bid),
                valuation=float(valuation),
                arrival=int(arrival),
                deadline=int(arrival + duration),
                duration=int(duration),
            )
        )
    return AuctionInstance(
        channels=chans, requests=tuple(reqs), horizon=horizon, geometry_mode=mode
    )


def random_instance(
    rng: np.random.Generator,
    n: int,
    m: int = 2,
    horizon: int = 60,
    arena: float = 100.0,
    bid_sampler=None,
    varied_interference: bool = False,
) -> AuctionInstance:
    """Scenario-style random instance at oracle scale.

    ``varied_interference`` draws a distinct interference radius per channel,
    breaking channel symmetry (useful where exact ties would otherwise make
    equally good channels interchangeable).
    """
    chans = tuple(
        Channel(
            id=j,
            interference_radius=float(rng.uniform(20, 40)) if varied_interference else 30.0,
            license_areas=(
                Disk(
                    center=(rng.uniform(0, arena), rng.uniform(0, arena)),
                    radius=rng.uniform(40, 70),
                ),
            ),
        )
        for j in range(m)
    )
    reqs = []
    for i in range(n):
        duration = int(rng.integers(10, 31))
        arrival = int(rng.integers(0, horizon - duration + 1))
        bid = float(bid_sampler(rng) if bid_sampler else rng.uniform(0, 1))
        reqs.append(
            Request(
                id=i,
                location=(rng.uniform(0, arena), rng.uniform(0, arena)),
                bid=bid,
                valuation=bid,
                arrival=arrival,
                deadline=arrival + duration,
                duration=duration,
            )
        )
    return AuctionInstance(
        channels=chans, requests=tuple(reqs), horizon=horizon,
        geometry_mode=GeometryMode.POINT,
    )


def pairwise_feasible(
    structure: ConflictStructure, assignment: Sequence[Optional[int]]
) -> bool:
    winners = [(i, j) for i, j in enumerate(assignment) if j is not None]
    for i, j in winners:
        if not structure.location[i, j]:
            return False
    for a in range(len(winners)):
        for b in range(a + 1, len(winners)):
            i, j = winners[a]
            k, jk = winners[b]
            if j == jk and structure.conflict[i, k, j]:
                return False
    return True


def star_feasible(
    instance: AuctionInstance,
    structure: ConflictStructure,
    assignment: Sequence[Optional[int]],
) -> bool:
    """Integral feasibility for the per-slice rows as formulated: besides
    pairwise conflict-freeness, no request may see two of its conflict
    neighbours winning the same slice of one channel."""
    if not pairwise_feasible(structure, assignment):
        return False
    n, m = instance.n, instance.m
    for j in range(m):
        for l in range(len(structure.slices[j])):
            covering = [
                i
                for i, ch in enumerate(assignment)
                if ch == j and l in structure.window_slices(i, j)
            ]
            for t in range(n):
                if l not in structure.window_slices(t, j):
                    continue
                neighbours = sum(
                    1 for w in covering if w != t and structure.conflict[t, w, j]
                )
                own = 1 if t in covering else 0
                if own + neighbours > 1:
                    return False
    return True


def enumerate_assignments(n: int, m: int):
    return itertools.product(*([None] + list(range(m)) for _ in range(n)))


def brute_force_optimum(
    instance: AuctionInstance,
    weights: Sequence[float],
    structure: Optional[ConflictStructure] = None,
) -> float:
    """Exhaustive maximum weight over star-feasible integral allocations."""
    if structure is None:
        structure = build_conflict_structure(instance)
    w = np.asarray(weights, dtype=float)
    best = 0.0
    for assignment in enumerate_assignments(instance.n, instance.m):
        if star_feasible(instance, structure, assignment):
            value = sum(w[i] for i, j in enumerate(assignment) if j is not None)
            best = max(best, value)
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
