"""The auction framework: objective switch, reserve filter, allocators, payments.

One entry point, ``run_framework``, wires together the pieces: social mode
feeds raw bids to the chosen allocator and charges its (virtual) payments
directly; revenue mode transforms bids through the Myerson virtual
valuation, drops requests below the per-minute reserve, runs the allocator
on what is left, and maps payments back through the inverse transform.
Payment schemes: exact VCG externalities, critical values for the
bid-monotone allocators, and the lottery payments of the
truthful-in-expectation mechanism.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .distributions import BidDistribution, inverse_virtual_bid, virtual_bid
from .exact import solve_ip_exact
from .greedy import mgca_allocate, mgca_critical_values
from .lp import POSITIVE_TOL
from .model import AuctionInstance, ConflictStructure, build_conflict_structure
from .relaxation import (
    FractionalAllocation,
    IntegralAllocation,
    Lp2System,
    ParametricLp2Cache,
    dca_allocate,
    mdca_allocate,
    solve_lp2,
    _schedule_for,
)

__all__ = [
    "Objective",
    "Allocator",
    "MechanismConfig",
    "AuctionOutcome",
    "CateDecomposition",
    "ConfigurationError",
    "DecompositionError",
    "UndefinedPaymentError",
    "run_framework",
    "vcg_payments",
    "mdca_critical_payment",
    "cate_decompose",
    "cate_payment",
    "cate_run",
    "CATE_ALPHA",
]

# Scaling factor of the lottery decomposition: e / (e - 1).
CATE_ALPHA = float(np.e / (np.e - 1.0))


class Objective(Enum):
    SOCIAL_EFFICIENCY = "social"
    REVENUE = "revenue"


class Allocator(Enum):
    EXACT_VCG = "exact-vcg"
    DCA = "dca"
    MDCA = "mdca"
    MGCA = "mgca"
    CATE = "cate"


class ConfigurationError(ValueError):
    """Incompatible mechanism configuration."""


class DecompositionError(RuntimeError):
    """Lottery decomposition failed to reach the target marginals."""

    def __init__(self, residual: float, message: str = ""):
        self.residual = residual
        super().__init__(message or f"decomposition residual {residual:.3e} above 1e-6")


class UndefinedPaymentError(ValueError):
    """Payment requested for a request that never wins (x_i ~ 0)."""


@dataclass
class MechanismConfig:
    objective: Objective
    allocator: Allocator
    reserve: float = 0.0
    distribution: Optional[BidDistribution] = None
    rng_seed: int = 0
    mdca_payment_resolution: float = 1e-4
    # Allocation-only runs (welfare studies) may skip payment computation.
    compute_payments: bool = True

    def validate(self) -> None:
        if self.reserve < 0:
            raise ConfigurationError("reserve must be nonnegative")
        if self.objective is Objective.REVENUE and self.distribution is None:
            raise ConfigurationError("revenue mode requires a bid distribution")
        if self.objective is Objective.REVENUE and self.allocator is Allocator.DCA:
            raise ConfigurationError(
                "DCA has no payment scheme and cannot be used in revenue mode"
            )


@dataclass
class AuctionOutcome:
    """Allocation plus payments, expressed against the filtered instance.

    ``kept_positions`` maps the filtered instance's request positions back
    to the original instance. Payments are keyed by request id and defined
    exactly for (realized) winners. For the lottery mechanism, ``lottery``
    lists the integral allocations with their probabilities and
    ``lottery_payments`` the per-request charge should it win.
    """

    instance: AuctionInstance
    kept_positions: list[int]
    allocation: IntegralAllocation
    payments: dict[int, float]
    virtual_payments: dict[int, float]
    objective_value: float
    lottery: Optional[list[tuple[IntegralAllocation, float]]] = None
    lottery_payments: Optional[dict[int, float]] = None

    def winner_channels(self) -> dict[int, int]:
        out = {}
        for i, j in enumerate(self.allocation.assignment):
            if j is not None:
                out[self.instance.requests[i].id] = self.instance.channels[j].id
        return out


@dataclass
class CateDecomposition:
    """Integral allocations and probabilities reproducing x / alpha."""

    columns: list[IntegralAllocation]
    probabilities: np.ndarray
    alpha: float = CATE_ALPHA


def vcg_payments(
    instance: AuctionInstance,
    virtual_bids: Sequence[float],
    winners: Sequence[int],
    *,
    structure: Optional[ConflictStructure] = None,
) -> dict[int, float]:
    """Per-winner externality: others' best welfare without the winner,
    minus others' welfare at the chosen optimum. Exact-solver based."""
    if structure is None:
        structure = build_conflict_structure(instance)
    phi = np.asarray(virtual_bids, dtype=float)
    total = float(phi[list(winners)].sum())
    payments: dict[int, float] = {}
    for i in winners:
        without = phi.copy()
        without[i] = 0.0
        best_without = solve_ip_exact(instance, without, structure=structure).weight
        others_now = total - phi[i]
        payments[i] = max(0.0, best_without - others_now)
    return payments


def mdca_critical_payment(
    instance: AuctionInstance,
    virtual_bids: Sequence[float],
    winner: int,
    resolution: float = 1e-4,
    *,
    structure: Optional[ConflictStructure] = None,
    system: Optional[Lp2System] = None,
) -> float:
    """Smallest winning virtual bid for an MDCA winner, by bisection.

    Holds all other bids fixed and re-runs the allocation at each probe;
    pseudo-polynomial in the bid scale over ``resolution``. A winner that
    still wins at zero pays zero.
    """
    if structure is None:
        structure = build_conflict_structure(instance)
    if system is None:
        system = Lp2System(instance, structure)
    phi = np.asarray(virtual_bids, dtype=float)
    cache = ParametricLp2Cache(system, phi, vary=winner)

    def wins(value: float) -> bool:
        probe = phi.copy()
        probe[winner] = value
        alloc = mdca_allocate(
            instance, probe, structure=structure, system=system,
            stop_after=winner, cache=cache,
        )
        return alloc.assignment[winner] is not None

    if wins(0.0):
        return 0.0
    lo, hi = 0.0, float(phi[winner])
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if wins(mid):
            hi = mid
        else:
            lo = mid
    # A winner never beaten down to the resolution floor pays nothing: at a
    # zero bid the relaxation just leaves it unallocated for lack of weight.
    return 0.0 if hi <= resolution else hi


def _master_solve(columns: list[frozenset[int]], active: list[int], target: np.ndarray):
    """Restricted lottery LP: min total probability mass (artificials
    penalized) subject to per-request coverage and total mass >= 1."""
    from scipy.optimize import linprog
    import scipy.sparse as sp

    n_cols = len(columns)
    n_act = len(active)
    big = 1e3
    c = np.concatenate([np.ones(n_cols), np.full(n_act, big)])
    rows, cols, vals = [], [], []
    for r, req in enumerate(active):
        for ci, col in enumerate(columns):
            if req in col:
                rows.append(r)
                cols.append(ci)
                vals.append(1.0)
        rows.append(r)
        cols.append(n_cols + r)
        vals.append(1.0)
    a_eq = sp.csr_matrix((vals, (rows, cols)), shape=(n_act, n_cols + n_act))
    b_eq = target[active]
    a_ub = sp.csr_matrix(
        (np.full(n_cols, -1.0), (np.zeros(n_cols, dtype=int), np.arange(n_cols))),
        shape=(1, n_cols + n_act),
    )
    res = linprog(
        c, A_ub=a_ub, b_ub=np.array([-1.0]), A_eq=a_eq, b_eq=b_eq,
        bounds=(0, None), method="highs",
    )
    if not res.success:
        raise DecompositionError(np.inf, f"restricted master failed: {res.message}")
    q = res.x[:n_cols]
    artificials = res.x[n_cols:]
    duals_w = res.eqlin.marginals
    dual_z = -float(res.ineqlin.marginals[0])
    return q, artificials, duals_w, dual_z


def cate_decompose(
    instance: AuctionInstance,
    frac: FractionalAllocation,
    virtual_bids: Sequence[float],
    *,
    structure: Optional[ConflictStructure] = None,
    system: Optional[Lp2System] = None,
    max_columns: int = 500,
) -> CateDecomposition:
    """Express x / alpha as a convex combination of integral allocations.

    Column generation on the lottery LP: the restricted master prices the
    current columns, and the derandomized allocator, run with the dual
    prices as bids, acts as the approximate separation oracle for the dual's
    exponentially many constraints. Raises DecompositionError with the
    residual if the marginals cannot be matched within 1e-6.
    """
    if structure is None:
        structure = build_conflict_structure(instance)
    if system is None:
        system = Lp2System(instance, structure)
    phi = np.asarray(virtual_bids, dtype=float)
    n = instance.n
    target = frac.x_row_sum / CATE_ALPHA
    active = [i for i in range(n) if frac.x_row_sum[i] > POSITIVE_TOL]

    def strip(alloc: IntegralAllocation, keep: Optional[set[int]] = None):
        # Dropping winners keeps an allocation feasible, so columns may be
        # restricted to requests the lottery actually needs to cover.
        assignment: list[Optional[int]] = [None] * n
        for i, j in enumerate(alloc.assignment):
            if j is None or target[i] <= POSITIVE_TOL:
                continue
            if keep is not None and i not in keep:
                continue
            assignment[i] = j
        return frozenset(i for i, j in enumerate(assignment) if j is not None), assignment

    columns: list[frozenset[int]] = [frozenset()]
    assignments: list[list[Optional[int]]] = [[None] * n]
    if active:
        seed = dca_allocate(instance, phi, structure=structure, system=system)
        col, assignment = strip(seed)
        if col not in columns:
            columns.append(col)
            assignments.append(assignment)

    q = np.array([1.0])
    if active:
        while True:
            q, _artificials, duals_w, dual_z = _master_solve(columns, active, target)
            weights = np.zeros(n)
            for r, req in enumerate(active):
                weights[req] = max(duals_w[r], 0.0)
            oracle = dca_allocate(instance, weights, structure=structure, system=system)
            col, assignment = strip(oracle, keep={i for i in range(n) if weights[i] > 0})
            violation = dual_z + sum(
                duals_w[r] for r, req in enumerate(active) if req in col
            )
            if violation > 1.0 + 1e-9 and col not in columns and len(columns) < max_columns:
                columns.append(col)
                assignments.append(assignment)
                continue
            break

    coverage = np.zeros(n)
    for ci, col in enumerate(columns):
        for i in col:
            coverage[i] += q[ci]
    residual = float(np.abs(coverage - target)[active].max()) if active else 0.0
    mass = float(q.sum())
    if residual > 1e-6 or abs(mass - 1.0) > 1e-6:
        raise DecompositionError(max(residual, abs(mass - 1.0)))
    q = np.clip(q, 0.0, None)
    q = q / q.sum()

    allocations = []
    for col, assignment in zip(columns, assignments):
        weight = float(phi[list(col)].sum()) if col else 0.0
        allocations.append(
            IntegralAllocation(assignment, _schedule_for(structure, assignment), weight)
        )
    return CateDecomposition(columns=allocations, probabilities=q)


def cate_payment(
    instance: AuctionInstance,
    frac: FractionalAllocation,
    virtual_bids: Sequence[float],
    i: int,
    *,
    structure: Optional[ConflictStructure] = None,
    system: Optional[Lp2System] = None,
) -> float:
    """Lottery charge per win: the drop in others' fractional welfare caused
    by request i's bid, spread over its allocation mass."""
    x_i = float(frac.x_row_sum[i])
    if x_i <= POSITIVE_TOL:
        raise UndefinedPaymentError(f"request at position {i} never wins (x ~ 0)")
    if system is None:
        system = Lp2System(instance, structure)
    phi = np.asarray(virtual_bids, dtype=float)
    zeroed = phi.copy()
    zeroed[i] = 0.0
    frac0 = solve_lp2(instance, zeroed, system=system)
    others = np.arange(instance.n) != i
    with_i = float(np.dot(phi[others], frac.x_row_sum[others]))
    without_i = float(np.dot(phi[others], frac0.x_row_sum[others]))
    return (without_i - with_i) / x_i


def cate_run(
    instance: AuctionInstance,
    virtual_bids: Sequence[float],
    rng: np.random.Generator,
    *,
    structure: Optional[ConflictStructure] = None,
    system: Optional[Lp2System] = None,
) -> tuple[IntegralAllocation, CateDecomposition, dict[int, float], FractionalAllocation]:
    """Sample one allocation from the lottery; winners pay the lottery charge.

    Returns (realized allocation, decomposition, virtual payments keyed by
    request position for every request appearing in some column, fractional
    optimum). Each request wins with probability x_i / alpha across the
    lottery and is charged its payment only when it wins.
    """
    if structure is None:
        structure = build_conflict_structure(instance)
    if system is None:
        system = Lp2System(instance, structure)
    frac = solve_lp2(instance, virtual_bids, structure=structure, system=system)
    decomp = cate_decompose(
        instance, frac, virtual_bids, structure=structure, system=system
    )
    idx = int(rng.choice(len(decomp.columns), p=decomp.probabilities))
    realized = decomp.columns[idx]
    chargeable = sorted({i for col in decomp.columns for i in col.winners()})
    payments = {
        i: cate_payment(instance, frac, virtual_bids, i, structure=structure, system=system)
        for i in chargeable
    }
    return realized, decomp, payments, frac


def run_framework(instance: AuctionInstance, config: MechanismConfig) -> AuctionOutcome:
    """Run one auction end to end and return allocation plus payments."""
    config.validate()
    n = instance.n
    bids = np.array([r.bid for r in instance.requests], dtype=float)
    if config.objective is Objective.REVENUE:
        dist = config.distribution
        assert dist is not None
        phi_full = np.array([virtual_bid(dist, b) for b in bids])
        kept = [
            i
            for i in range(n)
            if not (phi_full[i] < config.reserve * instance.requests[i].duration)
        ]
    else:
        phi_full = bids
        kept = list(range(n))
    sub = instance.restricted_to(kept)
    phi = phi_full[kept]
    structure = build_conflict_structure(sub)

    lottery = None
    lottery_payments = None
    if config.allocator is Allocator.EXACT_VCG:
        exact = solve_ip_exact(sub, phi, structure=structure)
        allocation = IntegralAllocation(exact.assignment, exact.schedule, exact.weight)
        virtual_p = (
            vcg_payments(sub, phi, allocation.winners(), structure=structure)
            if config.compute_payments
            else {}
        )
    elif config.allocator is Allocator.DCA:
        allocation = dca_allocate(sub, phi, structure=structure)
        virtual_p = {}
    elif config.allocator is Allocator.MDCA:
        system = Lp2System(sub, structure)
        allocation = mdca_allocate(sub, phi, structure=structure, system=system)
        virtual_p = (
            {
                i: mdca_critical_payment(
                    sub, phi, i, config.mdca_payment_resolution,
                    structure=structure, system=system,
                )
                for i in allocation.winners()
            }
            if config.compute_payments
            else {}
        )
    elif config.allocator is Allocator.MGCA:
        allocation = mgca_allocate(sub, phi, structure=structure)
        virtual_p = (
            mgca_critical_values(
                sub, phi, structure=structure, winners=allocation.winners()
            )
            if config.compute_payments
            else {}
        )
    elif config.allocator is Allocator.CATE:
        rng = np.random.default_rng(config.rng_seed)
        system = Lp2System(sub, structure)
        if config.compute_payments:
            allocation, decomp, virtual_p, _frac = cate_run(
                sub, phi, rng, structure=structure, system=system
            )
        else:
            frac = solve_lp2(sub, phi, structure=structure, system=system)
            decomp = cate_decompose(sub, frac, phi, structure=structure, system=system)
            idx = int(rng.choice(len(decomp.columns), p=decomp.probabilities))
            allocation = decomp.columns[idx]
            virtual_p = {}
        lottery = list(zip(decomp.columns, decomp.probabilities.tolist()))
        lottery_payments = {}
    else:  # pragma: no cover
        raise ConfigurationError(f"unknown allocator {config.allocator}")

    # Critical-value payments never fall below the reserve a winner had to
    # clear; the floor is what keeps the composed allocation rule truthful.
    critical_value = config.allocator in (
        Allocator.EXACT_VCG, Allocator.MDCA, Allocator.MGCA,
    )
    priced: dict[int, float] = {}
    virtual_by_id: dict[int, float] = {}
    for i, p_virtual in virtual_p.items():
        req = sub.requests[i]
        if config.objective is Objective.REVENUE:
            if critical_value:
                p_virtual = max(p_virtual, config.reserve * req.duration)
            price = inverse_virtual_bid(config.distribution, p_virtual)
        else:
            price = p_virtual
        priced[req.id] = price
        virtual_by_id[req.id] = p_virtual
    if config.allocator is Allocator.CATE:
        lottery_payments = dict(priced)
        winner_ids = {sub.requests[i].id for i in allocation.winners()}
        payments = {rid: p for rid, p in priced.items() if rid in winner_ids}
        virtual_by_id = {rid: p for rid, p in virtual_by_id.items() if rid in winner_ids}
    else:
        payments = priced

    return AuctionOutcome(
        instance=sub,
        kept_positions=kept,
        allocation=allocation,
        payments=payments,
        virtual_payments=virtual_by_id,
        objective_value=allocation.weight,
        lottery=lottery,
        lottery_payments=lottery_payments,
    )
