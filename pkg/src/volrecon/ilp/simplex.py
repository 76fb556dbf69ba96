"""Bounded-variable revised simplex with a dense basis inverse.

Two-phase: artificial variables absorb initial bound violations and are
minimized to zero, then frozen at [0, 0]. Pricing is Dantzig with a Bland
fallback once the objective stalls (anti-cycling). The basis inverse is
maintained by product-form rank-1 updates with periodic refactorization.
Problem sizes here are a few thousand rows, where dense O(m^2) numpy
updates beat sparse LU bookkeeping.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
STALL_LIMIT = 120
REFACTOR_EVERY = 500

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration-limit"

BASIC = 0
AT_LO = 1
AT_HI = 2


class LpProblem:
    """min c.x s.t. A x (sense) b with structural bounds supplied per solve."""

    def __init__(self, n_vars: int, rows, objective: np.ndarray):
        self.n = n_vars
        self.m = len(rows)
        self.c = np.asarray(objective, dtype=np.float64)
        data, ri, ci = [], [], []
        self.senses = []
        self.b = np.zeros(self.m)
        for i, row in enumerate(rows):
            ri.extend([i] * len(row.cols))
            ci.extend(row.cols.tolist())
            data.extend(row.vals.tolist())
            self.senses.append(row.sense)
            self.b[i] = row.rhs
        self.A = sp.csc_matrix((data, (ri, ci)), shape=(self.m, self.n))

    def slack_bounds(self):
        lo = np.zeros(self.m)
        hi = np.zeros(self.m)
        for i, s in enumerate(self.senses):
            if s == "<=":
                lo[i], hi[i] = 0.0, np.inf
            elif s == ">=":
                lo[i], hi[i] = -np.inf, 0.0
            else:
                lo[i], hi[i] = 0.0, 0.0
        return lo, hi


class _Tableau:
    def __init__(self, problem: LpProblem, lo: np.ndarray, hi: np.ndarray):
        m, n = problem.m, problem.n
        slack_lo, slack_hi = problem.slack_bounds()
        self.n_struct = n
        self.n_real = n + m
        A_aug = sp.hstack([problem.A, sp.identity(m, format="csc")], format="csc")
        lo_all = np.concatenate([lo, slack_lo])
        hi_all = np.concatenate([hi, slack_hi])

        x = np.where(np.isfinite(lo_all), lo_all, np.where(np.isfinite(hi_all), hi_all, 0.0))
        residual = problem.b - problem.A @ x[:n]

        basis = np.empty(m, dtype=np.int64)
        art_rows, art_sign = [], []
        for i in range(m):
            s = n + i
            val = np.clip(residual[i], slack_lo[i], slack_hi[i])
            if abs(residual[i] - val) <= FEAS_TOL:
                basis[i] = s
                x[s] = residual[i]
            else:
                x[s] = val
                d = residual[i] - val
                art_sign.append(1.0 if d > 0 else -1.0)
                art_rows.append(i)
                basis[i] = self.n_real + len(art_rows) - 1
        self.n_art = len(art_rows)
        if self.n_art:
            art = sp.csc_matrix(
                (np.array(art_sign), (np.array(art_rows), np.arange(self.n_art))),
                shape=(m, self.n_art),
            )
            A_aug = sp.hstack([A_aug, art], format="csc")
            lo_all = np.concatenate([lo_all, np.zeros(self.n_art)])
            hi_all = np.concatenate([hi_all, np.full(self.n_art, np.inf)])
            x = np.concatenate([x, np.zeros(self.n_art)])
        self.A = A_aug.tocsc()
        self.AT = self.A.T.tocsr()
        self.lo = lo_all
        self.hi = hi_all
        self.x = x
        self.m = m
        self.total = self.A.shape[1]
        self.basis = basis
        self.state = np.where(np.isfinite(lo_all), AT_LO, AT_HI).astype(np.int8)
        self.state[basis] = BASIC
        self.b = problem.b
        self.binv = self._factorize()
        self._sync_basics()

    def _factorize(self):
        B = np.zeros((self.m, self.m))
        for k, j in enumerate(self.basis):
            col = self.A[:, int(j)]
            B[col.indices, k] = col.data
        return np.linalg.inv(B)

    def _sync_basics(self):
        nb = self.state != BASIC
        x_nb = np.where(nb, self.x, 0.0)
        self.x[self.basis] = self.binv @ (self.b - self.A @ x_nb)

    def column(self, j: int):
        col = self.A[:, int(j)]
        return self.binv[:, col.indices] @ col.data

    def freeze_artificials(self):
        self.lo[self.n_real:] = 0.0
        self.hi[self.n_real:] = 0.0
        self.x[self.n_real:] = np.where(self.state[self.n_real:] == BASIC,
                                        self.x[self.n_real:], 0.0)


def _run_phase(t: _Tableau, cost: np.ndarray, max_iters: int):
    stall = 0
    best_obj = np.inf
    pivots = 0
    fixed = np.isfinite(t.lo) & np.isfinite(t.hi) & (t.hi - t.lo <= FEAS_TOL)
    for _ in range(max_iters):
        y = cost[t.basis] @ t.binv
        d = cost - t.AT @ y
        cand_lo = (t.state == AT_LO) & ~fixed & (d < -OPT_TOL)
        cand_hi = (t.state == AT_HI) & ~fixed & (d > OPT_TOL)
        cands = np.flatnonzero(cand_lo | cand_hi)
        if cands.size == 0:
            return OPTIMAL, pivots
        if stall > STALL_LIMIT:
            j = int(cands[0])  # Bland
        else:
            j = int(cands[np.argmax(np.abs(d[cands]))])
        sigma = 1.0 if cand_lo[j] else -1.0
        alpha = t.column(j)
        move = sigma * alpha
        xb = t.x[t.basis]
        bl = t.lo[t.basis]
        bh = t.hi[t.basis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t_dec = np.where(move > FEAS_TOL, (xb - bl) / np.where(move > FEAS_TOL, move, 1.0), np.inf)
            t_inc = np.where(move < -FEAS_TOL, (bh - xb) / np.where(move < -FEAS_TOL, -move, 1.0), np.inf)
        ratios = np.minimum(np.maximum(t_dec, 0.0), np.maximum(t_inc, 0.0))
        k_min = int(np.argmin(ratios))
        t_basic = float(ratios[k_min])
        t_flip = t.hi[j] - t.lo[j]
        step = min(t_basic, t_flip)
        if not np.isfinite(step):
            return "unbounded", pivots
        if t_flip <= t_basic + 1e-12 and np.isfinite(t_flip):
            # bound flip
            t.x[t.basis] = xb - t_flip * move
            t.x[j] = t.hi[j] if sigma > 0 else t.lo[j]
            t.state[j] = AT_HI if sigma > 0 else AT_LO
        else:
            ties = np.flatnonzero(ratios <= t_basic + 1e-12)
            if stall > STALL_LIMIT:
                leave = int(ties[np.argmin(t.basis[ties])])
            else:
                leave = int(ties[np.argmax(np.abs(move[ties]))])
            t.x[t.basis] = xb - step * move
            t.x[j] = (t.lo[j] if sigma > 0 else t.hi[j]) + sigma * step
            jl = int(t.basis[leave])
            hit_lo = move[leave] > 0
            t.x[jl] = t.lo[jl] if hit_lo else t.hi[jl]
            t.state[jl] = AT_LO if hit_lo else AT_HI
            t.state[j] = BASIC
            t.basis[leave] = j
            ar = alpha[leave]
            pivots += 1
            if abs(ar) < 1e-11:
                t.binv = t._factorize()
                t._sync_basics()
            else:
                row = t.binv[leave, :] / ar
                t.binv = t.binv - np.outer(alpha, row)
                t.binv[leave, :] = row
                if pivots % REFACTOR_EVERY == 0:
                    t.binv = t._factorize()
                    t._sync_basics()
        obj = float(cost @ t.x)
        if obj < best_obj - 1e-12:
            best_obj = obj
            stall = 0
        else:
            stall += 1
    return ITERATION_LIMIT, pivots


def solve_lp(problem: LpProblem, lo: np.ndarray, hi: np.ndarray, max_iters: int = 50_000):
    """Returns (status, structural values, objective)."""
    t = _Tableau(problem, lo, hi)
    if t.n_art:
        phase1 = np.zeros(t.total)
        phase1[t.n_real:] = 1.0
        status, _ = _run_phase(t, phase1, max_iters)
        if status == ITERATION_LIMIT:
            return ITERATION_LIMIT, t.x[: t.n_struct].copy(), float("nan")
        if float(phase1 @ t.x) > 1e-7:
            return INFEASIBLE, t.x[: t.n_struct].copy(), float("nan")
        t.freeze_artificials()
    cost = np.zeros(t.total)
    cost[: t.n_struct] = problem.c
    status, _ = _run_phase(t, cost, max_iters)
    if status == "unbounded":
        raise ArithmeticError("LP reported unbounded with bounded structurals")
    xs = np.clip(t.x[: t.n_struct], lo, hi)
    obj = float(problem.c @ xs)
    if status == ITERATION_LIMIT:
        return ITERATION_LIMIT, xs, obj
    return OPTIMAL, xs, obj
