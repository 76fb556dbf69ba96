"""Branch-and-bound over the LP relaxation.

Best-first node order on the LP bound; branching on the most fractional
variable (ties: larger |objective coefficient|). The all-outside,
no-walls labeling seeds the incumbent whenever it satisfies the user
rows. Every incumbent is re-verified against all constraint rows in
exact integer arithmetic before it is accepted.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .model import OUTSIDE, SENSE_EQ, SENSE_GE, SENSE_LE, IlpModel
from .simplex import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, LpProblem, solve_lp

INT_TOL = 1e-6

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_GAP_LIMIT = "gap-limit"


class SolveError(Exception):
    pass


@dataclass
class Labeling:
    values: np.ndarray  # int8 per variable
    objective_value: float
    solver_status: str
    gap: float = 0.0
    nodes: int = 0

    def value(self, model: IlpModel, cell: int, kind: str, label: int = -1) -> int:
        j = model.var(cell, kind, label)
        return int(self.values[j]) if j is not None else 0

    def to_dict(self, model: IlpModel) -> dict:
        return {model.var_name(j): int(self.values[j]) for j in range(model.n_vars)}


def check_integer_rows(model: IlpModel, values: np.ndarray) -> bool:
    """Exact integer verification of every constraint row."""
    iv = values.astype(np.int64)
    for row in model.rows:
        lhs = int((iv[row.cols] * row.vals.astype(np.int64)).sum())
        rhs = int(round(row.rhs))
        if row.sense == SENSE_EQ and lhs != rhs:
            return False
        if row.sense == SENSE_LE and lhs > rhs:
            return False
        if row.sense == SENSE_GE and lhs < rhs:
            return False
    return True


def exact_objective(model: IlpModel, values: np.ndarray) -> Fraction:
    total = Fraction(0)
    for j in np.flatnonzero(values):
        total += Fraction(model.objective[j])
    return total


def _all_outside_values(model: IlpModel) -> np.ndarray:
    values = np.zeros(model.n_vars, dtype=np.int8)
    for j in range(model.n_vars):
        if model.var_kind[j] == OUTSIDE:
            values[j] = 1
    return values


def _relative_gap(incumbent: float, bound: float) -> float:
    return (incumbent - bound) / max(1.0, abs(incumbent))


class _LazyLp:
    """LP relaxation over a growing pool of rows.

    Any row subset relaxes the full problem, so pool-LP optima are valid
    lower bounds; rows violated by a pool optimum are added and the LP is
    re-solved until the optimum satisfies every row (the bound then equals
    the full-LP bound). Equality rows are always in the pool.
    """

    def __init__(self, model: IlpModel):
        self.model = model
        self.n = model.n_vars
        rows = model.rows
        data, ri, ci = [], [], []
        self.rhs = np.zeros(len(rows))
        self.sense_le = np.zeros(len(rows), dtype=bool)
        self.sense_ge = np.zeros(len(rows), dtype=bool)
        for i, row in enumerate(rows):
            ri.extend([i] * len(row.cols))
            ci.extend(row.cols.tolist())
            data.extend(row.vals.tolist())
            self.rhs[i] = row.rhs
            self.sense_le[i] = row.sense == SENSE_LE
            self.sense_ge[i] = row.sense == SENSE_GE
        import scipy.sparse as sp

        self.A = sp.csr_matrix((data, (ri, ci)), shape=(len(rows), self.n))
        self.pool = np.array([r.sense == SENSE_EQ for r in rows])
        self.problem = None
        self.pool_dirty = True

    def _violated(self, x, tol=1e-7):
        lhs = self.A @ x
        bad = (self.sense_le & (lhs > self.rhs + tol)) | (self.sense_ge & (lhs < self.rhs - tol))
        return np.flatnonzero(bad & ~self.pool)

    def solve(self, lo, hi):
        while True:
            if self.pool_dirty:
                rows = [self.model.rows[i] for i in np.flatnonzero(self.pool)]
                self.problem = LpProblem(self.n, rows, self.model.objective)
                self.pool_dirty = False
            status, x, obj = solve_lp(self.problem, lo, hi)
            if status != OPTIMAL:
                return status, x, obj
            new = self._violated(x)
            if new.size == 0:
                return OPTIMAL, x, obj
            self.pool[new] = True
            self.pool_dirty = True


def solve(model: IlpModel, gap_tol: float = 1e-6, time_limit: float = 600.0) -> Labeling:
    if model.n_vars == 0:
        raise SolveError("empty model")
    lazy = _LazyLp(model)
    base_lo = np.zeros(model.n_vars)
    base_hi = np.ones(model.n_vars)

    incumbent = None
    incumbent_obj = np.inf
    warm = _all_outside_values(model)
    if check_integer_rows(model, warm):
        incumbent = warm
        incumbent_obj = float(model.objective @ warm)

    t0 = time.monotonic()
    counter = 0
    nodes = 0
    frac_score = np.abs(model.objective)

    status, x, obj = lazy.solve(base_lo, base_hi)
    if status == INFEASIBLE:
        return Labeling(
            values=incumbent if incumbent is not None else np.zeros(model.n_vars, np.int8),
            objective_value=incumbent_obj if incumbent is not None else float("nan"),
            solver_status=STATUS_INFEASIBLE,
            gap=float("inf"),
        )
    if status == ITERATION_LIMIT:
        raise SolveError("root LP hit the iteration limit")

    heap = [(obj, counter, base_lo, base_hi, x)]
    best_bound = obj

    def most_fractional(x):
        frac = np.minimum(x - np.floor(x + INT_TOL), np.ceil(x - INT_TOL) - x)
        frac = np.where(frac < INT_TOL, -1.0, frac)
        j = int(np.lexsort((-frac_score, -frac))[0])
        return j if frac[j] > 0 else -1

    while heap:
        if incumbent is not None and _relative_gap(incumbent_obj, heap[0][0]) <= gap_tol:
            best_bound = heap[0][0]
            break
        if time.monotonic() - t0 > time_limit:
            if incumbent is None:
                raise SolveError("time limit reached with no incumbent")
            return Labeling(incumbent, incumbent_obj, STATUS_GAP_LIMIT,
                            gap=_relative_gap(incumbent_obj, heap[0][0]), nodes=nodes)
        bound, _, lo, hi, x = heapq.heappop(heap)
        if incumbent is not None and bound >= incumbent_obj - gap_tol * max(1.0, abs(incumbent_obj)):
            best_bound = bound
            break
        nodes += 1
        j = most_fractional(x)
        if j < 0:
            rounded = np.rint(x).astype(np.int8)
            if check_integer_rows(model, rounded):
                obj_r = float(model.objective @ rounded)
                if obj_r < incumbent_obj:
                    incumbent = rounded
                    incumbent_obj = obj_r
                continue
            # numerically integral but rounding broke a row: branch anyway
            j = int(np.argmin(np.abs(x - 0.5)))
        for fix in (0.0, 1.0):
            lo2 = lo.copy()
            hi2 = hi.copy()
            lo2[j] = fix
            hi2[j] = fix
            status, x2, obj2 = lazy.solve(lo2, hi2)
            if status == INFEASIBLE:
                continue
            if status == ITERATION_LIMIT:
                raise SolveError("node LP hit the iteration limit")
            if incumbent is not None and obj2 >= incumbent_obj - gap_tol * max(1.0, abs(incumbent_obj)):
                continue
            counter += 1
            heapq.heappush(heap, (obj2, counter, lo2, hi2, x2))

    if incumbent is None:
        return Labeling(np.zeros(model.n_vars, np.int8), float("nan"),
                        STATUS_INFEASIBLE, gap=float("inf"), nodes=nodes)
    if not check_integer_rows(model, incumbent):
        raise SolveError("incumbent failed exact row verification")
    gap = max(0.0, _relative_gap(incumbent_obj, min(best_bound, incumbent_obj)))
    return Labeling(incumbent, incumbent_obj, STATUS_OPTIMAL, gap=gap, nodes=nodes)
