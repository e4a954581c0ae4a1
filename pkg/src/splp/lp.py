"""Linear programs ``min c.x  s.t.  A x <= b,  lb <= x <= ub`` with finite column bounds.

Two interchangeable backends:

``DualSimplex``
    Dense bounded-variable dual simplex with an explicit basis inverse.
    Starting from the all-slack basis, a dual feasible start always exists
    (every structural column has finite bounds, so each nonbasic column can
    sit at the bound matching the sign of its reduced cost). Appending rows
    or columns and changing bounds keep the basis dual feasible, so repeated
    solves during cutting and branching warm-start.

``HighsLP``
    Sparse cold solves through ``scipy.optimize.linprog(method="highs")`` for
    relaxations too large for a dense basis inverse.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ._accel import njit

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration_limit"
TIME_LIMIT = "time_limit"


@dataclass
class LPResult:
    status: str
    x: np.ndarray
    objective: float
    iterations: int


class _RowStore:
    """Columns and sparse rows shared by both backends."""

    def __init__(self):
        self.c = np.zeros(0)
        self.lb = np.zeros(0)
        self.ub = np.zeros(0)
        self._ri, self._rj, self._rv = [], [], []
        self.b = np.zeros(0)

    @property
    def n_cols(self):
        return self.c.shape[0]

    @property
    def n_rows(self):
        return self.b.shape[0]

    def add_columns(self, cost, lb, ub) -> int:
        start = self.n_cols
        cost = np.atleast_1d(np.asarray(cost, dtype=float))
        lb = np.broadcast_to(np.asarray(lb, dtype=float), cost.shape)
        ub = np.broadcast_to(np.asarray(ub, dtype=float), cost.shape)
        if np.any(~np.isfinite(lb)) or np.any(~np.isfinite(ub)):
            raise ValueError("column bounds must be finite")
        self.c = np.concatenate([self.c, cost])
        self.lb = np.concatenate([self.lb, lb])
        self.ub = np.concatenate([self.ub, ub])
        return start

    def add_rows(self, rows, rhs) -> int:
        """``rows`` is a list of ``(column indices, coefficients)``."""
        start = self.n_rows
        for k, (idx, val) in enumerate(rows):
            idx = np.asarray(idx, dtype=np.int64)
            self._ri.append(np.full(idx.shape[0], start + k, np.int64))
            self._rj.append(idx)
            self._rv.append(np.asarray(val, dtype=float))
        self.b = np.concatenate([self.b, np.asarray(rhs, dtype=float)])
        return start

    def set_bounds(self, lb, ub):
        self.lb = np.array(lb, dtype=float)
        self.ub = np.array(ub, dtype=float)

    def matrix(self):
        if not self._ri:
            return sp.csr_matrix((self.n_rows, self.n_cols))
        return sp.csr_matrix(
            (np.concatenate(self._rv), (np.concatenate(self._ri), np.concatenate(self._rj))),
            shape=(self.n_rows, self.n_cols),
        )


class HighsLP(_RowStore):
    def solve(self, max_iter=None, deadline=None) -> LPResult:
        if self.n_cols == 0:
            return LPResult(OPTIMAL, np.zeros(0), 0.0, 0)
        if np.any(self.lb > self.ub + 1e-12):
            return LPResult(INFEASIBLE, np.zeros(self.n_cols), np.inf, 0)
        kw = {}
        if self.n_rows:
            kw = dict(A_ub=self.matrix(), b_ub=self.b)
        opts = {}
        if deadline is not None:
            left = deadline - time.perf_counter()
            if left <= 0:
                return LPResult(TIME_LIMIT, np.zeros(self.n_cols), -np.inf, 0)
            opts["time_limit"] = left
        res = linprog(self.c, bounds=np.column_stack([self.lb, self.ub]), method="highs", options=opts, **kw)
        it = int(getattr(res, "nit", 0) or 0)
        if res.status == 2:
            return LPResult(INFEASIBLE, np.zeros(self.n_cols), np.inf, it)
        if res.status == 1 and deadline is not None and time.perf_counter() >= deadline:
            return LPResult(TIME_LIMIT, np.zeros(self.n_cols), -np.inf, it)
        if res.status != 0:
            return LPResult(ITERATION_LIMIT, np.zeros(self.n_cols), -np.inf, it)
        x = np.clip(res.x, self.lb, self.ub)
        return LPResult(OPTIMAL, x, float(self.c @ x), it)


class DualSimplex(_RowStore):
    """Dense bounded dual simplex. See module docstring."""

    tol_primal = 1e-9
    tol_dual = 1e-9
    tol_pivot = 1e-9
    # eta updates between inversions; scaled with the row count since an
    # inversion costs about as much as m rank-one updates
    refactor_every = 64

    def __init__(self):
        super().__init__()
        self.A = np.zeros((0, 0))
        # basis[i] >= 0: structural column; basis[i] < 0: slack of row ~basis[i]
        self.basis = np.zeros(0, np.int64)
        self.at_ub = np.zeros(0, bool)
        self.col_pos = np.zeros(0, np.int64)   # position in basis, -1 if nonbasic
        self.slack_pos = np.zeros(0, np.int64)
        self.Binv = np.zeros((0, 0))
        self._since = 0

    # -- growth ---------------------------------------------------------

    def add_columns(self, cost, lb, ub) -> int:
        start = super().add_columns(cost, lb, ub)
        k = self.n_cols - start
        self.A = np.hstack([self.A, np.zeros((self.A.shape[0], k))])
        self.at_ub = np.concatenate([self.at_ub, np.zeros(k, bool)])
        self.col_pos = np.concatenate([self.col_pos, -np.ones(k, np.int64)])
        return start

    def add_rows(self, rows, rhs) -> int:
        start = super().add_rows(rows, rhs)
        k = self.n_rows - start
        new = np.zeros((k, self.n_cols))
        for r, (idx, val) in enumerate(rows):
            np.add.at(new[r], np.asarray(idx, dtype=np.int64), np.asarray(val, dtype=float))
        m0 = self.A.shape[0]
        self.A = np.vstack([self.A, new])
        # new slacks enter the basis: B' = [[B, 0], [a_B, I]]
        aB = np.zeros((k, m0))
        for i, v in enumerate(self.basis):
            if v >= 0:
                aB[:, i] = new[:, v]
        Binv = np.zeros((m0 + k, m0 + k))
        Binv[:m0, :m0] = self.Binv
        Binv[m0:, :m0] = -aB @ self.Binv
        Binv[m0:, m0:] = np.eye(k)
        self.Binv = Binv
        self.basis = np.concatenate([self.basis, -1 - np.arange(m0, m0 + k)])
        self.slack_pos = np.concatenate([self.slack_pos, np.arange(m0, m0 + k)])
        return start

    # -- helpers --------------------------------------------------------

    def _slack_basis(self):
        m = self.n_rows
        self.basis = -1 - np.arange(m)
        self.col_pos[:] = -1
        self.slack_pos = np.arange(m)
        self.Binv = np.eye(m)
        self._since = 0

    def _primal(self):
        xs = np.where(self.at_ub, self.ub, self.lb)
        xs[self.col_pos >= 0] = 0.0
        xB = self.Binv @ (self.b - self.A @ xs)
        s = self.basis >= 0
        xs[self.basis[s]] = xB[s]
        return xs, xB

    # -- main loop ------------------------------------------------------

    # pivots per compiled call between deadline checks
    chunk = 2000

    def solve(self, max_iter=50_000, deadline=None) -> LPResult:
        m, n = self.n_rows, self.n_cols
        if n == 0 and m == 0:
            return LPResult(OPTIMAL, np.zeros(0), 0.0, 0)
        if np.any(self.lb > self.ub + 1e-12):
            return LPResult(INFEASIBLE, np.zeros(n), np.inf, 0)
        self.A = np.ascontiguousarray(self.A)
        total = 0
        restarts = 0
        while True:
            budget = min(self.chunk, max_iter - total)
            try:
                code, it, self._since = _dual_loop(
                    self.A, self.b, self.c, self.lb, self.ub, self.basis, self.at_ub,
                    self.col_pos, self.slack_pos, self.Binv, budget,
                    self.tol_primal, self.tol_dual, self.tol_pivot, max(self.refactor_every, m // 2),
                    self._since,
                )
            except np.linalg.LinAlgError:
                code, it = _LOST, 0
            total += it
            if code == _LOST:
                restarts += 1
                if restarts > 2:
                    break
                log.debug("dual simplex lost its basis, restarting from slacks")
                self._slack_basis()
                continue
            if code != _LIMIT or total >= max_iter:
                break
            if deadline is not None and time.perf_counter() >= deadline:
                return LPResult(TIME_LIMIT, np.zeros(n), -np.inf, total)
        xs, _ = self._primal()
        xs = np.clip(xs, self.lb, self.ub)
        if code == _OPTIMAL:
            return LPResult(OPTIMAL, xs, float(self.c @ xs), total)
        if code == _INFEASIBLE:
            return LPResult(INFEASIBLE, xs, np.inf, total)
        return LPResult(ITERATION_LIMIT, xs, -np.inf, total)


_OPTIMAL, _INFEASIBLE, _LIMIT, _LOST = 0, 1, 2, 3


@njit(cache=True)
def _refresh(A, b, c, lb, ub, basis, at_ub, col_pos, slack_pos, Binv, d, ds, xB, tol_d, do_inv):
    """Optionally refactor the basis inverse; recompute duals and basic values.

    Nonbasic columns whose reduced cost has the wrong sign are flipped to the
    other bound. Returns False if a nonbasic slack is dual infeasible.
    """
    m, n = A.shape
    cB = np.zeros(m)
    for i in range(m):
        if basis[i] >= 0:
            cB[i] = c[basis[i]]
    if do_inv:
        B = np.zeros((m, m))
        for i in range(m):
            v = basis[i]
            if v >= 0:
                B[:, i] = A[:, v]
            else:
                B[-1 - v, i] = 1.0
        Binv[:, :] = np.linalg.inv(B)
    pi = Binv.T @ cB
    d[:] = c - A.T @ pi
    for i in range(m):
        ds[i] = -pi[i]
        if slack_pos[i] < 0 and ds[i] < -1e-7:
            return False
    xs = np.zeros(n)
    for j in range(n):
        if col_pos[j] < 0:
            if ub[j] > lb[j]:
                if d[j] < -tol_d and not at_ub[j]:
                    at_ub[j] = True
                elif d[j] > tol_d and at_ub[j]:
                    at_ub[j] = False
            xs[j] = ub[j] if at_ub[j] else lb[j]
    xB[:] = Binv @ (b - A @ xs)
    return True


@njit(cache=True)
def _dual_loop(A, b, c, lb, ub, basis, at_ub, col_pos, slack_pos, Binv,
               max_iter, tol_p, tol_d, tol_piv, refactor_every, since):
    # ``since`` counts eta updates applied to ``Binv`` since its last inversion
    m, n = A.shape
    d = np.zeros(n)
    ds = np.zeros(m)
    xB = np.zeros(m)
    if m == 0:
        for j in range(n):
            at_ub[j] = c[j] < 0 and ub[j] > lb[j]
        return 0, 0, 0
    if not _refresh(A, b, c, lb, ub, basis, at_ub, col_pos, slack_pos, Binv, d, ds, xB, tol_d,
                    since >= refactor_every):
        return 3, 0, 0
    if since >= refactor_every:
        since = 0
    fresh = True
    bland = False
    degenerate = 0
    for it in range(max_iter):
        if since >= refactor_every:
            if not _refresh(A, b, c, lb, ub, basis, at_ub, col_pos, slack_pos, Binv, d, ds, xB, tol_d, True):
                return 3, it, since
            since = 0
            fresh = True
        # leaving row
        r = -1
        best = tol_p
        best_key = 1 << 62
        for i in range(m):
            v = basis[i]
            if v >= 0:
                lo_i, hi_i = lb[v], ub[v]
                key = v
            else:
                lo_i, hi_i = 0.0, np.inf
                key = n + (-1 - v)
            if xB[i] < lo_i:
                inf_i = lo_i - xB[i]
            elif xB[i] > hi_i:
                inf_i = xB[i] - hi_i
            else:
                inf_i = 0.0
            if inf_i > tol_p:
                if bland:
                    if key < best_key:
                        best_key = key
                        r = i
                elif inf_i > best:
                    best = inf_i
                    r = i
        if r < 0:
            if fresh:
                return 0, it, since
            # confirm optimality on values recomputed from the current inverse
            do_inv = since >= refactor_every // 2
            if not _refresh(A, b, c, lb, ub, basis, at_ub, col_pos, slack_pos, Binv, d, ds, xB, tol_d, do_inv):
                return 3, it, since
            if do_inv:
                since = 0
            fresh = True
            continue
        v = basis[r]
        lo_r = lb[v] if v >= 0 else 0.0
        to_lower = xB[r] < lo_r
        sign = -1.0 if to_lower else 1.0
        rowr = Binv[r].copy()
        alpha = A.T @ rowr
        # ratio test (Harris two-pass; Bland takes the lowest index among minimal ratios)
        bound = np.inf
        for j in range(n):
            if col_pos[j] >= 0 or ub[j] <= lb[j]:
                continue
            sa = sign * alpha[j]
            if (not at_ub[j] and sa > tol_piv) or (at_ub[j] and sa < -tol_piv):
                t = (abs(d[j]) + tol_d) / abs(alpha[j])
                if t < bound:
                    bound = t
        for i in range(m):
            if slack_pos[i] < 0 and sign * rowr[i] > tol_piv:
                t = (max(ds[i], 0.0) + tol_d) / abs(rowr[i])
                if t < bound:
                    bound = t
        if bound == np.inf:
            if fresh:
                return 1, it, since
            if not _refresh(A, b, c, lb, ub, basis, at_ub, col_pos, slack_pos, Binv, d, ds, xB, tol_d, True):
                return 3, it, since
            since = 0
            fresh = True
            continue
        q = -1
        q_slack = False
        best_mag = -1.0
        best_ratio = np.inf
        for j in range(n):
            if col_pos[j] >= 0 or ub[j] <= lb[j]:
                continue
            sa = sign * alpha[j]
            if (not at_ub[j] and sa > tol_piv) or (at_ub[j] and sa < -tol_piv):
                ratio = abs(d[j]) / abs(alpha[j])
                if bland:
                    if ratio < best_ratio - 1e-12:
                        best_ratio = ratio
                        q = j
                elif ratio <= bound and abs(alpha[j]) > best_mag:
                    best_mag = abs(alpha[j])
                    q = j
        for i in range(m):
            if slack_pos[i] < 0 and sign * rowr[i] > tol_piv:
                ratio = max(ds[i], 0.0) / abs(rowr[i])
                if bland:
                    if ratio < best_ratio - 1e-12:
                        best_ratio = ratio
                        q = i
                        q_slack = True
                elif ratio <= bound and abs(rowr[i]) > best_mag:
                    best_mag = abs(rowr[i])
                    q = i
                    q_slack = True
        if q_slack:
            acol = Binv[:, q].copy()
            dq = ds[q]
            xq = 0.0
        else:
            acol = Binv @ np.ascontiguousarray(A[:, q])
            dq = d[q]
            xq = ub[q] if at_ub[q] else lb[q]
        piv = acol[r]
        if abs(piv) < 1e-11:
            if fresh:
                # numerically hopeless row; restart from the slack basis
                return 3, it, since
            if not _refresh(A, b, c, lb, ub, basis, at_ub, col_pos, slack_pos, Binv, d, ds, xB, tol_d, True):
                return 3, it, since
            since = 0
            fresh = True
            continue
        theta_d = dq / piv
        if abs(theta_d) < 1e-12:
            degenerate += 1
            if degenerate > 50:
                bland = True
        else:
            degenerate = 0
        d -= theta_d * alpha
        ds -= theta_d * rowr
        target = lo_r if to_lower else ub[v]
        theta_p = (xB[r] - target) / piv
        xB -= theta_p * acol
        xB[r] = xq + theta_p
        if v >= 0:
            col_pos[v] = -1
            at_ub[v] = not to_lower
            d[v] = -theta_d
        else:
            slack_pos[-1 - v] = -1
            ds[-1 - v] = -theta_d
        if q_slack:
            basis[r] = -1 - q
            slack_pos[q] = r
            ds[q] = 0.0
        else:
            basis[r] = q
            col_pos[q] = r
            d[q] = 0.0
        # eta update of the explicit inverse
        Binv[r] /= piv
        for i in range(m):
            f = acol[i]
            if i != r and f != 0.0:
                for k in range(m):
                    Binv[i, k] -= f * Binv[r, k]
        since += 1
        fresh = False
    return 2, max_iter, since


def make_lp(backend: str):
    if backend == "simplex":
        return DualSimplex()
    if backend == "highs":
        return HighsLP()
    raise ValueError(f"unknown LP backend {backend!r}")


def to_highs(lp: _RowStore) -> HighsLP:
    """Copy columns and rows into a sparse backend."""
    out = HighsLP()
    out.c, out.lb, out.ub, out.b = lp.c.copy(), lp.lb.copy(), lp.ub.copy(), lp.b.copy()
    out._ri, out._rj, out._rv = list(lp._ri), list(lp._rj), list(lp._rv)
    return out
