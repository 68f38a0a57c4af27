"""LP relaxation of the allocation problem, rounding, and derandomization.

The integer program relaxes into four row families: one channel per
request, slice-eligibility caps, per-slice conflict rows, and duration
coverage. Duration coverage is kept in its per-slice form (each slice
variable moves together with its channel indicator), which every integral
solution satisfies anyway; relaxing the slices independently instead would
let conflicting requests pack disjoint parts of their windows fractionally
and push the fractional optimum beyond e/(e-1) times the best integral
allocation, where the rounding guarantees cannot hold. With the slices
tied, the whole fractional story lives on the channel indicators x[i, j],
matching the closed-form allocation probabilities used below.

On top of the fractional optimum this module provides the randomized
rounding procedure, the closed-form conditional expected weights used to
derandomize it (DCA), and the bid-monotone variant that re-solves the
relaxation around each decision (MDCA).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .lp import LinearProgram, POSITIVE_TOL
from .model import AuctionInstance, ConflictStructure, build_conflict_structure

__all__ = [
    "FractionalAllocation",
    "IntegralAllocation",
    "Lp2System",
    "build_lp2",
    "solve_lp2",
    "randomized_round",
    "allocation_probability",
    "conditional_probability",
    "expected_weight",
    "conditional_expected_weight",
    "dca_allocate",
    "mdca_allocate",
]

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}

# Tolerance for treating an LP variable as integral when reusing a solution.
_INTEGRAL_TOL = 1e-9


@dataclass
class FractionalAllocation:
    """Optimum of the relaxation: x[i, j] plus per-channel slice variables."""

    x: np.ndarray  # (n, m)
    slice_x: list[np.ndarray]  # per channel: (n, n_slices)
    x_row_sum: np.ndarray  # (n,)
    weight: float


@dataclass
class IntegralAllocation:
    """A feasible integral allocation with its schedule and total weight."""

    assignment: list[Optional[int]]
    schedule: dict[int, list[int]]
    weight: float

    def winners(self) -> list[int]:
        return [i for i, j in enumerate(self.assignment) if j is not None]


def _schedule_for(structure: ConflictStructure, assignment: Sequence[Optional[int]]):
    return {
        i: list(structure.window_slices(i, j))
        for i, j in enumerate(assignment)
        if j is not None
    }


class Lp2System:
    """The relaxation compiled once per instance into a sparse matrix.

    With the slice variables tied to their channel indicators, the only
    free variables are the eligible x[i, j]; the per-slice conflict rows
    collapse onto them (duplicates across slices removed). Repeated solves
    only swap the objective and variable bounds, which is what the
    derandomized allocators need.
    """

    def __init__(self, instance: AuctionInstance, structure: Optional[ConflictStructure] = None):
        if structure is None:
            structure = build_conflict_structure(instance)
        self.instance = instance
        self.structure = structure
        n, m = instance.n, instance.m
        self.x_col: dict[tuple[int, int], int] = {}
        for i in range(n):
            for j in range(m):
                if structure.location[i, j]:
                    self.x_col[(i, j)] = len(self.x_col)
        self.n_vars = len(self.x_col)

        y = structure.conflict
        data: list[float] = []
        ri: list[int] = []
        ci: list[int] = []
        nrow = 0
        seen: set[tuple[int, int, frozenset[int]]] = set()
        for j in range(m):
            present: list[list[int]] = [[] for _ in structure.slices[j]]
            for i in range(n):
                for l in structure.window_slices(i, j):
                    present[l].append(i)
            for pres in present:
                for i in pres:
                    neighbours = frozenset(k for k in pres if k != i and y[i, k, j])
                    key = (j, i, neighbours)
                    if key in seen:
                        continue
                    seen.add(key)
                    ri.append(nrow)
                    ci.append(self.x_col[(i, j)])
                    data.append(1.0)
                    for k in neighbours:
                        ri.append(nrow)
                        ci.append(self.x_col[(k, j)])
                        data.append(1.0)
                    nrow += 1
        for i in range(n):
            cols = [self.x_col[(i, j)] for j in range(m) if (i, j) in self.x_col]
            if len(cols) > 1:
                for col in cols:
                    ri.append(nrow)
                    ci.append(col)
                    data.append(1.0)
                nrow += 1
        self.a_ub = (
            sp.csr_matrix((data, (ri, ci)), shape=(nrow, self.n_vars), dtype=float)
            if nrow
            else None
        )
        self.b_ub = np.ones(nrow) if nrow else None

    def objective(self, weights: Sequence[float]) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for (i, _j), col in self.x_col.items():
            c[col] = weights[i]
        return c

    def solve(
        self,
        weights: Sequence[float],
        fixes: Optional[dict[int, tuple[float, float]]] = None,
    ) -> Optional[tuple[float, np.ndarray]]:
        """Maximize under optional per-column bound overrides.

        Returns (value, x matrix), or None when the overrides make the
        program infeasible.
        """
        n, m = self.instance.n, self.instance.m
        if self.n_vars == 0:
            return 0.0, np.zeros((n, m))
        bounds = np.zeros((self.n_vars, 2))
        bounds[:, 1] = 1.0
        if fixes:
            for col, (lo, hi) in fixes.items():
                bounds[col, 0] = lo
                bounds[col, 1] = hi
        res = linprog(
            -self.objective(weights),
            A_ub=self.a_ub,
            b_ub=self.b_ub,
            bounds=bounds,
            method="highs",
            options=_HIGHS_OPTIONS,
        )
        if res.status == 2:
            return None
        if not res.success:
            raise RuntimeError(f"relaxation solve failed: {res.message}")
        x = np.zeros((n, m))
        for (i, j), col in self.x_col.items():
            x[i, j] = res.x[col]
        return -float(res.fun), x

    def slice_values(self, x: np.ndarray) -> list[np.ndarray]:
        """Per-channel slice variables implied by x (uniform on windows)."""
        structure = self.structure
        n, m = self.instance.n, self.instance.m
        slices = [np.zeros((n, len(structure.slices[j]))) for j in range(m)]
        for (i, j) in self.x_col:
            for l in structure.window_slices(i, j):
                slices[j][i, l] = x[i, j]
        return slices


def build_lp2(
    instance: AuctionInstance,
    virtual_bids: Sequence[float],
    *,
    structure: Optional[ConflictStructure] = None,
) -> LinearProgram:
    """The relaxation as a plain LinearProgram (dense rows, oracle scale).

    Variables: channel indicators x[i, j] for eligible pairs (i-major),
    then slice variables grouped by channel. Rows: at most one channel per
    request, slice-eligibility caps, per-slice conflict rows, and the
    per-slice duration coupling tying each slice variable to its channel
    indicator.
    """
    if structure is None:
        structure = build_conflict_structure(instance)
    n, m = instance.n, instance.m
    x_col: dict[tuple[int, int], int] = {}
    for i in range(n):
        for j in range(m):
            if structure.location[i, j]:
                x_col[(i, j)] = len(x_col)
    s_col: dict[tuple[int, int, int], int] = {}
    offset = len(x_col)
    for j in range(m):
        for i in range(n):
            for l in structure.window_slices(i, j):
                s_col[(i, j, l)] = offset + len(s_col)
    nv = len(x_col) + len(s_col)

    objective = np.zeros(nv)
    for (i, _j), col in x_col.items():
        objective[col] = virtual_bids[i]
    constraints: list[tuple[np.ndarray, str, float]] = []
    for i in range(n):
        cols = [x_col[(i, j)] for j in range(m) if (i, j) in x_col]
        if cols:
            row = np.zeros(nv)
            row[cols] = 1.0
            constraints.append((row, "<=", 1.0))
    for col in s_col.values():
        row = np.zeros(nv)
        row[col] = 1.0
        constraints.append((row, "<=", 1.0))
    y = structure.conflict
    for j in range(m):
        present: list[list[int]] = [[] for _ in structure.slices[j]]
        for i in range(n):
            for l in structure.window_slices(i, j):
                present[l].append(i)
        for l, pres in enumerate(present):
            for i in pres:
                row = np.zeros(nv)
                row[s_col[(i, j, l)]] = 1.0
                for k in pres:
                    if k != i and y[i, k, j]:
                        row[s_col[(k, j, l)]] = 1.0
                constraints.append((row, "<=", 1.0))
    for (i, j), xc in x_col.items():
        for l in structure.window_slices(i, j):
            row = np.zeros(nv)
            row[s_col[(i, j, l)]] = 1.0
            row[xc] = -1.0
            constraints.append((row, "==", 0.0))
    bounds = [(0.0, 1.0)] * nv
    return LinearProgram(objective=objective, constraints=constraints, bounds=bounds)


def solve_lp2(
    instance: AuctionInstance,
    virtual_bids: Sequence[float],
    *,
    structure: Optional[ConflictStructure] = None,
    system: Optional[Lp2System] = None,
) -> FractionalAllocation:
    """Optimal fractional allocation for the given (virtual) bids."""
    if system is None:
        system = Lp2System(instance, structure)
    solved = system.solve(virtual_bids)
    assert solved is not None, "the relaxation is always feasible without overrides"
    value, x = solved
    return FractionalAllocation(
        x=x, slice_x=system.slice_values(x), x_row_sum=x.sum(axis=1), weight=value
    )


def randomized_round(
    instance: AuctionInstance,
    frac: FractionalAllocation,
    virtual_bids: Sequence[float],
    rng: np.random.Generator,
    *,
    structure: Optional[ConflictStructure] = None,
) -> IntegralAllocation:
    """Round the fractional optimum to a feasible integral allocation.

    Visits (channel, request) pairs in random order; an undecided request is
    accepted on a channel with probability x[i, j]. Acceptance claims the
    request's whole window, blocks conflicting requests on that channel, and
    settles the request everywhere else.
    """
    if structure is None:
        structure = build_conflict_structure(instance)
    n, m = instance.n, instance.m
    x = frac.x
    pairs = [(j, i) for j in range(m) for i in range(n) if x[i, j] > POSITIVE_TOL]
    order = rng.permutation(len(pairs))
    decided = np.zeros(n, dtype=bool)
    blocked = np.zeros((n, m), dtype=bool)
    assignment: list[Optional[int]] = [None] * n
    for idx in order:
        j, i = pairs[idx]
        if decided[i] or blocked[i, j]:
            continue
        if rng.random() < x[i, j]:
            assignment[i] = j
            decided[i] = True
            conflicts = structure.conflict[i, :, j]
            blocked[conflicts, j] = True
    weight = float(sum(virtual_bids[i] for i, j in enumerate(assignment) if j is not None))
    return IntegralAllocation(assignment, _schedule_for(structure, assignment), weight)


def allocation_probability(frac: FractionalAllocation, i: int) -> float:
    """Probability request i is allocated anywhere under the rounding."""
    return float(1.0 - np.prod(1.0 - frac.x[i]))


def _prob_without_channel(x: np.ndarray, k: int, j: int) -> float:
    keep = 1.0 - x[k]
    return float(1.0 - np.prod(np.delete(keep, j)))


def conditional_probability(
    frac: FractionalAllocation,
    structure: ConflictStructure,
    i: int,
    j: int,
    k: int,
) -> float:
    """Probability request k is allocated given request i lands on channel j."""
    if i == k:
        raise ValueError("conditional probability needs two distinct requests")
    if structure.conflict[i, k, j]:
        return _prob_without_channel(frac.x, k, j)
    return allocation_probability(frac, k)


def expected_weight(frac: FractionalAllocation, virtual_bids: Sequence[float]) -> float:
    """Expected rounded weight: sum of bids times allocation probabilities."""
    q = 1.0 - np.prod(1.0 - frac.x, axis=1)
    return float(np.dot(np.asarray(virtual_bids, dtype=float), q))


def conditional_expected_weight(
    frac: FractionalAllocation,
    structure: ConflictStructure,
    i: int,
    j: int,
    virtual_bids: Sequence[float],
) -> float:
    """Expected rounded weight given request i lands on channel j."""
    phi = np.asarray(virtual_bids, dtype=float)
    return _cond_expected(frac.x, structure, i, j, phi)


def _cond_expected(x: np.ndarray, structure: ConflictStructure, i: int, j: int,
                   phi: np.ndarray) -> float:
    keep = 1.0 - x
    q = 1.0 - np.prod(keep, axis=1)
    q_without_j = 1.0 - np.prod(np.delete(keep, j, axis=1), axis=1)
    cond = np.where(structure.conflict[i, :, j], q_without_j, q)
    total = float(np.dot(phi, cond) - phi[i] * cond[i])
    return float(phi[i] + total)


def _scan_order(instance: AuctionInstance) -> list[int]:
    # Ascending arrival, ties by request id.
    return sorted(
        range(instance.n),
        key=lambda i: (instance.requests[i].arrival, instance.requests[i].id),
    )


def dca_allocate(
    instance: AuctionInstance,
    virtual_bids: Sequence[float],
    *,
    structure: Optional[ConflictStructure] = None,
    frac: Optional[FractionalAllocation] = None,
    system: Optional[Lp2System] = None,
    trace: Optional[list[float]] = None,
) -> IntegralAllocation:
    """Derandomized rounding via conditional expectations.

    Scans requests by arrival; a request with fractional mass is fixed to the
    first feasible channel whose conditional expected weight does not fall
    below the running expectation, applying the same zeroing a rounding
    acceptance would. ``trace``, when given, records the running expectation
    after each request's decision.
    """
    if structure is None:
        structure = build_conflict_structure(instance)
    if frac is None:
        frac = solve_lp2(instance, virtual_bids, structure=structure, system=system)
    n, m = instance.n, instance.m
    phi = np.asarray(virtual_bids, dtype=float)
    x = frac.x.copy()
    assignment: list[Optional[int]] = [None] * n
    y = structure.conflict

    def running_expectation() -> float:
        q = 1.0 - np.prod(1.0 - x, axis=1)
        return float(np.dot(phi, q))

    e_cur = running_expectation()
    for i in _scan_order(instance):
        if x[i].sum() <= POSITIVE_TOL:
            x[i, :] = 0.0
            if trace is not None:
                trace.append(e_cur)
            continue
        chosen = None
        for j in range(m):
            if not structure.location[i, j]:
                continue
            if any(
                assignment[k] == j and y[i, k, j] for k in range(n) if assignment[k] is not None
            ):
                continue
            e_cond = _cond_expected(x, structure, i, j, phi)
            if e_cond >= e_cur - 1e-12:
                chosen = j
                break
        if chosen is None:
            x[i, :] = 0.0
        else:
            assignment[i] = chosen
            x[i, :] = 0.0
            x[i, chosen] = 1.0
            x[y[i, :, chosen], chosen] = 0.0
        e_cur = running_expectation()
        if trace is not None:
            trace.append(e_cur)
    weight = float(phi[[i for i, j in enumerate(assignment) if j is not None]].sum())
    return IntegralAllocation(assignment, _schedule_for(structure, assignment), weight)


class ParametricLp2Cache:
    """Memo for LP(2) re-solves that differ only in one bid coordinate.

    The optimal value is convex piecewise-linear in a single objective
    coefficient with slope equal to that request's allocated mass, so two
    solves whose supporting lines coincide certify the segment between them:
    values interpolate exactly and either endpoint's solution stays optimal.
    Used by the critical-payment bisection, where thousands of re-solves
    differ only in the probed bid.
    """

    def __init__(self, system: Lp2System, base_bids: Sequence[float], vary: int):
        self.system = system
        self.base = np.asarray(base_bids, dtype=float)
        self.vary = vary
        self._store: dict[tuple, list[tuple[float, float, float, np.ndarray]]] = {}
        self.solve_count = 0

    def _points(self, key: tuple) -> list[tuple[float, float, float, np.ndarray]]:
        return self._store.setdefault(key, [])

    def solve(
        self, t: float, fixes: dict[int, tuple[float, float]]
    ) -> Optional[tuple[float, np.ndarray]]:
        key = tuple(sorted((c, lo, hi) for c, (lo, hi) in fixes.items()))
        points = self._points(key)
        for t0, v0, s0, x0 in points:
            if abs(t0 - t) <= 1e-15:
                return v0, x0
        lo_pt = None
        hi_pt = None
        for pt in points:
            if pt[0] < t and (lo_pt is None or pt[0] > lo_pt[0]):
                lo_pt = pt
            if pt[0] > t and (hi_pt is None or pt[0] < hi_pt[0]):
                hi_pt = pt
        if lo_pt is not None and hi_pt is not None:
            t1, v1, s1, x1 = lo_pt
            t2, v2, _s2, _x2 = hi_pt
            if abs(v1 + s1 * (t2 - t1) - v2) <= 1e-7 * (1.0 + abs(v2)):
                return v1 + s1 * (t - t1), x1
        bids = self.base.copy()
        bids[self.vary] = t
        solved = self.system.solve(bids, fixes=fixes)
        self.solve_count += 1
        if solved is None:
            return None
        value, x = solved
        slope = float(x[self.vary].sum())
        points.append((t, value, slope, x))
        points.sort(key=lambda p: p[0])
        return value, x


def mdca_allocate(
    instance: AuctionInstance,
    virtual_bids: Sequence[float],
    *,
    structure: Optional[ConflictStructure] = None,
    system: Optional[Lp2System] = None,
    stop_after: Optional[int] = None,
    cache: Optional[ParametricLp2Cache] = None,
    _no_shortcut: bool = False,
) -> IntegralAllocation:
    """Bid-monotone derandomized allocation.

    Per request (arrival order), compares the best conditional expectation
    over feasible channels, each obtained by re-solving the relaxation with
    the request fixed there (and all prior decisions fixed), against the
    re-solve without the request; allocates to the argmax channel when it is
    at least the without-case. ``stop_after`` ends the scan once that request
    is decided (enough for win checks); ``cache`` shares re-solves across
    runs that differ only in one request's bid.
    """
    if structure is None:
        structure = build_conflict_structure(instance)
    if system is None:
        system = Lp2System(instance, structure)
    n, m = instance.n, instance.m
    phi = np.asarray(virtual_bids, dtype=float)
    y = structure.conflict

    def solve(fixes: dict[int, tuple[float, float]]):
        if cache is not None:
            return cache.solve(phi[cache.vary], fixes)
        solved = system.solve(phi, fixes=fixes)
        if solved is None:
            return None
        return solved[0], solved[1]

    base = solve({})
    assert base is not None
    value_cur, x = base
    x = x.copy()
    fixes: dict[int, tuple[float, float]] = {}
    assignment: list[Optional[int]] = [None] * n

    def fix_request_zero(i: int) -> dict[int, tuple[float, float]]:
        return {
            system.x_col[(i, j)]: (0.0, 0.0)
            for j in range(m)
            if (i, j) in system.x_col
        }

    def fix_commit(i: int, j: int) -> dict[int, tuple[float, float]]:
        out: dict[int, tuple[float, float]] = {system.x_col[(i, j)]: (1.0, 1.0)}
        for o in range(m):
            if o != j and (i, o) in system.x_col:
                out[system.x_col[(i, o)]] = (0.0, 0.0)
        for k in range(n):
            if k != i and y[i, k, j] and assignment[k] is None and (k, j) in system.x_col:
                out[system.x_col[(k, j)]] = (0.0, 0.0)
        return out

    for i in _scan_order(instance):
        if x[i].sum() <= POSITIVE_TOL:
            fixes.update(fix_request_zero(i))
            x[i, :] = 0.0
            if stop_after == i:
                break
            continue
        candidates = [
            j
            for j in range(m)
            if structure.location[i, j]
            and not any(
                assignment[k] == j and y[i, k, j]
                for k in range(n)
                if assignment[k] is not None
            )
        ]
        # When the current optimum already places i integrally on a channel
        # with no conflicting fractional mass there, committing changes
        # nothing: that channel attains the maximum conditional expectation
        # and beats the without-case, so no re-solves are needed.
        shortcut = None
        best = int(np.argmax(x[i]))
        if not _no_shortcut and x[i, best] >= 1.0 - _INTEGRAL_TOL and best in candidates:
            others = [o for o in range(m) if o != best]
            conflict_mass = float(x[y[i, :, best], best].sum())
            own_mass = float(x[i, others].sum()) if others else 0.0
            if conflict_mass <= _INTEGRAL_TOL and own_mass <= _INTEGRAL_TOL:
                shortcut = best
        if shortcut is not None:
            j = shortcut
            assignment[i] = j
            fixes.update(fix_commit(i, j))
            x[i, :] = 0.0
            x[i, j] = 1.0
            x[y[i, :, j], j] = 0.0
        else:
            without = solve({**fixes, **fix_request_zero(i)})
            assert without is not None, "zeroing a request keeps the program feasible"
            value_without, x_without = without
            best_value = -np.inf
            best_j = None
            best_x = None
            for j in candidates:
                probe = solve({**fixes, **fix_commit(i, j)})
                if probe is None:
                    continue
                value_j, x_j = probe
                if value_j > best_value + 1e-12:
                    best_value = value_j
                    best_j = j
                    best_x = x_j
            if best_j is not None and best_value >= value_without - 1e-9:
                assignment[i] = best_j
                fixes.update(fix_commit(i, best_j))
                x = best_x.copy()
                value_cur = best_value
            else:
                fixes.update(fix_request_zero(i))
                x = x_without.copy()
                value_cur = value_without
        if stop_after == i:
            break
    weight = float(phi[[i for i, j in enumerate(assignment) if j is not None]].sum())
    return IntegralAllocation(assignment, _schedule_for(structure, assignment), weight)
