import itertools

import numpy as np
import pytest

from conftest import make_instance
from spectrumauction.lp import (
    LinearProgram,
    LpInputError,
    LpStatus,
    solve_lp,
)
from spectrumauction.relaxation import build_lp2


def vertex_enumeration_optimum(lp: LinearProgram) -> float:
    """Independent oracle: enumerate vertices of the (bounded) polytope as
    intersections of n tight constraints, keep the feasible ones, take the
    best objective. Only for tiny LPs."""
    nvar = len(lp.objective)
    rows = []
    rhs = []
    eq_idx = []
    for coeffs, relation, b in lp.constraints:
        if relation == "==":
            eq_idx.append(len(rows))
        rows.append(np.asarray(coeffs, dtype=float))
        rhs.append(float(b))
    for v, (lo, hi) in enumerate(lp.bounds):
        row = np.zeros(nvar)
        row[v] = 1.0
        rows.append(-row)
        rhs.append(-lo)
        assert hi is not None, "oracle needs a bounded polytope"
        rows.append(row)
        rhs.append(hi)
    rows = np.array(rows)
    rhs = np.array(rhs)

    def feasible(x):
        for k, (coeffs, relation, b) in enumerate(lp.constraints):
            val = coeffs @ x
            if relation == "==" and abs(val - b) > 1e-7:
                return False
            if relation == "<=" and val > b + 1e-7:
                return False
        for v, (lo, hi) in enumerate(lp.bounds):
            if x[v] < lo - 1e-7 or x[v] > hi + 1e-7:
                return False
        return True

    best = None
    for combo in itertools.combinations(range(len(rows)), nvar):
        if not set(eq_idx).issubset(combo):
            continue
        a = rows[list(combo)]
        b = rhs[list(combo)]
        if abs(np.linalg.det(a)) < 1e-10:
            continue
        x = np.linalg.solve(a, b)
        if feasible(x):
            val = float(lp.objective @ x)
            best = val if best is None else max(best, val)
    assert best is not None, "oracle found no vertex"
    return best


class TestSolveLp:
    def test_simple_cap(self):
        lp = LinearProgram(
            objective=np.array([1.0, 1.0]),
            constraints=[(np.array([1.0, 1.0]), "<=", 1.0)],
            bounds=[(0.0, 1.0), (0.0, 1.0)],
        )
        sol = solve_lp(lp)
        assert sol.status is LpStatus.OPTIMAL
        assert sol.objective_value == pytest.approx(1.0, abs=1e-9)

    def test_infeasible(self):
        lp = LinearProgram(
            objective=np.array([1.0]),
            constraints=[(np.array([1.0]), "<=", -1.0)],
            bounds=[(0.0, 1.0)],
        )
        assert solve_lp(lp).status is LpStatus.INFEASIBLE

    def test_unbounded(self):
        lp = LinearProgram(
            objective=np.array([1.0]),
            constraints=[],
            bounds=[(0.0, None)],
        )
        assert solve_lp(lp).status is LpStatus.UNBOUNDED

    def test_dimension_mismatch(self):
        lp = LinearProgram(
            objective=np.array([1.0, 2.0]),
            constraints=[(np.array([1.0]), "<=", 1.0)],
            bounds=[(0.0, 1.0), (0.0, 1.0)],
        )
        with pytest.raises(LpInputError):
            solve_lp(lp)

    def test_lp2_two_conflicting_requests(self):
        # Identical windows, full conflict: the relaxation already picks the
        # bid-5 request outright.
        inst = make_instance([(40, 50, 3.0, 0, 20), (60, 50, 5.0, 0, 20)])
        lp = build_lp2(inst, [3.0, 5.0])
        sol = solve_lp(lp)
        assert sol.status is LpStatus.OPTIMAL
        assert sol.objective_value == pytest.approx(5.0, abs=1e-9)
        assert sol.objective_value == pytest.approx(vertex_enumeration_optimum(lp), abs=1e-7)

    def test_matches_vertex_enumeration_on_random_lps(self, rng):
        for trial in range(40):
            nvar = int(rng.integers(2, 5))
            n_rows = int(rng.integers(1, 5))
            a = rng.uniform(-1, 1, (n_rows, nvar))
            b = rng.uniform(0.2, 1.5, n_rows)  # origin stays feasible
            lp = LinearProgram(
                objective=rng.uniform(-1, 1, nvar),
                constraints=[(a[r], "<=", float(b[r])) for r in range(n_rows)],
                bounds=[(0.0, 1.0)] * nvar,
            )
            sol = solve_lp(lp)
            assert sol.status is LpStatus.OPTIMAL
            assert sol.objective_value == pytest.approx(
                vertex_enumeration_optimum(lp), abs=1e-7
            ), f"trial {trial}"

    def test_equality_constraints_respected(self):
        lp = LinearProgram(
            objective=np.array([1.0, 0.0]),
            constraints=[(np.array([1.0, 1.0]), "==", 0.7)],
            bounds=[(0.0, 1.0), (0.0, 1.0)],
        )
        sol = solve_lp(lp)
        assert sol.status is LpStatus.OPTIMAL
        assert sol.objective_value == pytest.approx(0.7, abs=1e-9)
        assert sol.values @ np.array([1.0, 1.0]) == pytest.approx(0.7, abs=1e-9)
