"""LP / MILP backend.

Wraps scipy's HiGHS bindings behind a row-sense interface so the rest of
the code never touches solver-specific sign conventions.  Rows carry senses
'L' (<=), 'G' (>=), 'E' (=).  Reported duals follow the convention of a
minimization problem stated with those senses directly: duals of 'L' rows
are <= 0, duals of 'G' rows are >= 0, duals of 'E' rows are free, and the
reduced cost of column j is c_j - sum_r y_r * a_rj against the original
coefficients.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp


@dataclasses.dataclass
class LPResult:
    status: str            # optimal | infeasible | unbounded | error
    objective: float
    x: np.ndarray
    duals: np.ndarray      # one entry per row, in input row order
    message: str = ""


@dataclasses.dataclass
class MILPResult:
    status: str            # optimal | feasible | no_solution | infeasible | error
    objective: float
    x: np.ndarray
    best_bound: float
    message: str = ""


def _as_csr(A, n_cols):
    if A is None:
        return sp.csr_matrix((0, n_cols))
    if sp.issparse(A):
        return A.tocsr()
    return sp.csr_matrix(np.asarray(A, dtype=float))


def solve_lp(c, A, senses, rhs, col_lb, col_ub, tol=1e-9) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A = _as_csr(A, n)
    senses = np.asarray(list(senses))
    rhs = np.asarray(rhs, dtype=float)
    le = np.flatnonzero(senses == "L")
    ge = np.flatnonzero(senses == "G")
    eq = np.flatnonzero(senses == "E")
    A_ub = b_ub = A_eq = b_eq = None
    if le.size or ge.size:
        A_ub = sp.vstack([A[le], -A[ge]], format="csr") if ge.size else A[le]
        b_ub = np.concatenate([rhs[le], -rhs[ge]])
    if eq.size:
        A_eq = A[eq]
        b_eq = rhs[eq]
    bounds = list(zip(np.asarray(col_lb, dtype=float),
                      np.asarray(col_ub, dtype=float)))
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    if res.status == 2:
        return LPResult("infeasible", float("inf"), np.zeros(n),
                        np.zeros(len(senses)), res.message)
    if res.status == 3:
        return LPResult("unbounded", float("-inf"), np.zeros(n),
                        np.zeros(len(senses)), res.message)
    if res.status != 0:
        return LPResult("error", float("nan"), np.zeros(n),
                        np.zeros(len(senses)), res.message)
    duals = np.zeros(len(senses))
    if le.size or ge.size:
        marg = np.asarray(res.ineqlin.marginals, dtype=float)
        duals[le] = marg[:le.size]
        duals[ge] = -marg[le.size:]
    if eq.size:
        duals[eq] = np.asarray(res.eqlin.marginals, dtype=float)
    # zero out sub-tolerance sign violations from roundoff
    wrong_le = (senses == "L") & (duals > 0) & (duals < tol)
    wrong_ge = (senses == "G") & (duals < 0) & (duals > -tol)
    duals[wrong_le | wrong_ge] = 0.0
    return LPResult("optimal", float(res.fun), np.asarray(res.x, dtype=float),
                    duals, res.message)


def solve_milp(c, A, senses, rhs, col_lb, col_ub, integral,
               time_limit=None) -> MILPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A = _as_csr(A, n)
    senses = np.asarray(list(senses))
    rhs = np.asarray(rhs, dtype=float)
    lo = np.where(senses == "L", -np.inf, rhs)
    hi = np.where(senses == "G", np.inf, rhs)
    constraints = []
    if len(senses):
        constraints.append(LinearConstraint(A, lo, hi))
    options = {"mip_rel_gap": 0.0}
    if time_limit is not None and np.isfinite(time_limit):
        options["time_limit"] = max(float(time_limit), 0.05)
    res = milp(c=c, constraints=constraints,
               integrality=np.asarray(integral, dtype=np.uint8),
               bounds=Bounds(np.asarray(col_lb, dtype=float),
                             np.asarray(col_ub, dtype=float)),
               options=options)
    bound = getattr(res, "mip_dual_bound", None)
    bound = float("-inf") if bound is None else float(bound)
    if res.status == 2:
        return MILPResult("infeasible", float("inf"), np.zeros(n),
                          float("inf"), res.message)
    if res.status == 0:
        return MILPResult("optimal", float(res.fun),
                          np.asarray(res.x, dtype=float), bound, res.message)
    if res.status == 1 and res.x is not None:
        return MILPResult("feasible", float(res.fun),
                          np.asarray(res.x, dtype=float), bound, res.message)
    if res.status == 1:
        return MILPResult("no_solution", float("inf"), np.zeros(n), bound,
                          res.message)
    return MILPResult("error", float("nan"), np.zeros(n), bound, res.message)
