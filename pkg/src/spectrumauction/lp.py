"""Generic linear-program container and solver.

Problems are stated as maximizations over box-bounded variables with <= and
== rows. Solving is delegated to HiGHS through scipy; the spec'd contract
(optimal/infeasible/unbounded status, deterministic results, 1e-9
feasibility) is what callers rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

__all__ = [
    "LpStatus",
    "LinearProgram",
    "LpSolution",
    "LpInputError",
    "solve_lp",
    "FEASIBILITY_TOL",
    "POSITIVE_TOL",
]

# A constraint is satisfied when violated by no more than this.
FEASIBILITY_TOL = 1e-9
# An LP value counts as "positive" only above this (solutions are inexact).
POSITIVE_TOL = 1e-9

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LpInputError(ValueError):
    """Malformed linear program (dimension mismatch, bad bounds)."""


@dataclass
class LinearProgram:
    """max objective . x subject to rows (coeffs, relation, rhs) and box bounds.

    ``relation`` is "<=" or "=="; bounds are per-variable (lo, hi) with hi
    possibly None for unbounded above.
    """

    objective: np.ndarray
    constraints: list[tuple[np.ndarray, str, float]]
    bounds: list[tuple[float, Optional[float]]]

    def validate(self) -> None:
        nvar = len(self.objective)
        if len(self.bounds) != nvar:
            raise LpInputError(f"{len(self.bounds)} bounds for {nvar} variables")
        for coeffs, relation, rhs in self.constraints:
            if len(coeffs) != nvar:
                raise LpInputError(f"constraint row of length {len(coeffs)}, expected {nvar}")
            if relation not in ("<=", "=="):
                raise LpInputError(f"unknown relation {relation!r}")
            if not np.isfinite(rhs):
                raise LpInputError("constraint rhs must be finite")
        for lo, hi in self.bounds:
            if hi is not None and lo > hi:
                raise LpInputError(f"bound lo {lo} > hi {hi}")


@dataclass
class LpSolution:
    status: LpStatus
    values: Optional[np.ndarray]
    objective_value: Optional[float]


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Solve to optimality (for the maximization as stated) or report why not."""
    lp.validate()
    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    for coeffs, relation, rhs in lp.constraints:
        if relation == "<=":
            a_ub.append(np.asarray(coeffs, dtype=float))
            b_ub.append(float(rhs))
        else:
            a_eq.append(np.asarray(coeffs, dtype=float))
            b_eq.append(float(rhs))
    res = linprog(
        -np.asarray(lp.objective, dtype=float),
        A_ub=np.array(a_ub) if a_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(a_eq) if a_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=lp.bounds,
        method="highs",
        options=_HIGHS_OPTIONS,
    )
    if res.status == 2:
        return LpSolution(LpStatus.INFEASIBLE, None, None)
    if res.status == 3:
        return LpSolution(LpStatus.UNBOUNDED, None, None)
    if not res.success:
        raise RuntimeError(f"LP solver failed: {res.message}")
    return LpSolution(LpStatus.OPTIMAL, res.x, -float(res.fun))
