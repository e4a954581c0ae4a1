"""Branch-and-cut for the joint selection / labeling / partitioning ILP.

The relaxation starts unconstrained: every ``x``, ``y`` lies in ``[0, 1]``
and every ``z`` is absent from the LP. An absent ``z`` takes its
unconstrained optimum (1 when its cost is negative, 0 otherwise), which is
accounted as a constant offset of the bound. After each LP solve the point
is checked against all five inequality families; a violated linearization
row pulls its ``z`` into the LP as a column. Integral points are separated
for transitivity by breadth-first search; fractional points only when
``fractional_separation`` is set.
"""
from __future__ import annotations

import enum
import heapq
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import constraints, kernels
from .lp import INFEASIBLE, ITERATION_LIMIT, TIME_LIMIT, DualSimplex, HighsLP, make_lp, to_highs
from .model import (
    DetectionSet, Mode, Person, PoseResult, ProblemInstance, SolutionTriple, n_pairs, pair_arrays,
)
from .objective import evaluate

log = logging.getLogger(__name__)

INT_TOL = 1e-6
SEP_TOL = 1e-7
BRUTE_FORCE_MAX = 8
# dense basis inverse is used while rows * columns stays below this
DENSE_LIMIT = 3_000_000


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    GAP_REACHED = "gap_reached"
    LIMIT = "limit"


@dataclass(frozen=True)
class SolverConfig:
    gap_tolerance: float = 0.01
    max_nodes: int = 100_000
    max_wall_time: float = 900.0
    fractional_separation: bool = False
    rng_seed: int = 0
    max_cuts_per_round: int = constraints.MAX_CUTS
    lp_backend: str = "auto"              # auto | simplex | highs
    preinstall_linearization: bool = False
    lifted_rows: bool = True
    heuristics: bool = True
    max_rounds_per_node: int = 200

    def __post_init__(self):
        if not 0 < self.gap_tolerance <= 1:
            raise ValueError("gap_tolerance must lie in (0, 1]")
        if self.max_nodes <= 0 or self.max_wall_time <= 0 or self.max_cuts_per_round <= 0:
            raise ValueError("limits must be positive")
        if self.lp_backend not in ("auto", "simplex", "highs"):
            raise ValueError(f"unknown lp_backend {self.lp_backend!r}")


@dataclass
class SolverReport:
    best_objective: float
    lower_bound: float
    gap: float
    nodes_explored: int
    cuts_added: int
    lp_iterations: int
    status: Status
    wall_time: float = 0.0
    columns_added: int = 0
    backend: str = ""
    fixed_by_dominance: int = 0
    log: list = field(default_factory=list)

    def to_dict(self, with_log=False):
        d = {
            "best_objective": self.best_objective,
            "lower_bound": self.lower_bound,
            "gap": self.gap,
            "nodes_explored": self.nodes_explored,
            "cuts_added": self.cuts_added,
            "columns_added": self.columns_added,
            "lp_iterations": self.lp_iterations,
            "status": self.status.value,
            "backend": self.backend,
            "fixed_by_dominance": self.fixed_by_dominance,
        }
        if with_log:
            d["log"] = list(self.log)
        return d


def relative_gap(ub: float, lb: float) -> float:
    """``(UB - LB) / max(|LB|, 1e-12)``, zero once the bounds meet."""
    diff = ub - lb
    if diff <= 1e-12:
        return 0.0
    return diff / max(abs(lb), 1e-12)


# ---------------------------------------------------------------------------
# oracle


def brute_force(inst: ProblemInstance):
    """Exact optimum by enumerating labelings and partitions. ``|D| <= 8``."""
    if inst.n > BRUTE_FORCE_MAX:
        raise ValueError(f"brute force refused for |D| = {inst.n} > {BRUTE_FORCE_MAX}")
    best, lab, blk = kernels.brute_force_labels(inst.alpha, inst.beta, inst.mode == Mode.SINGLE)
    sol = SolutionTriple.from_labels(lab, blk, inst.n_classes, inst.mode)
    return sol, float(evaluate(inst, sol).total)


def lp_relax(cost, rows, rhs, lb, ub, backend="simplex"):
    """Solve ``min cost.v  s.t. rows v <= rhs, lb <= v <= ub``.

    ``rows`` is a list of ``(indices, coefficients)``. Raises ``Infeasible``
    when the fixings leave no feasible point (the caller prunes).
    """
    lp = make_lp(backend)
    lp.add_columns(cost, lb, ub)
    if rows:
        lp.add_rows(rows, rhs)
    res = lp.solve()
    if res.status == INFEASIBLE:
        raise Infeasible
    if res.status != "optimal":
        raise RuntimeError(f"LP did not converge ({res.status})")
    return res.x, res.objective


class Infeasible(Exception):
    pass


# ---------------------------------------------------------------------------
# heuristics


def dominated_classes(inst: ProblemInstance) -> np.ndarray:
    """Mask of ``(d, c)`` that can be fixed to 0 without losing optimality.

    If ``alpha_dc`` plus every negative pairwise cost ``d`` could collect as
    class ``c`` is still non-negative, suppressing ``d`` never hurts.
    """
    n, nc = inst.alpha.shape
    if n == 0:
        return np.zeros((0, nc), bool)
    lo, hi = pair_arrays(n)
    neg = np.minimum(inst.beta, 0.0)
    best_lo = neg.min(axis=2)   # (P, C): lower endpoint as class c
    best_hi = neg.min(axis=1)   # (P, C): higher endpoint as class c
    gain = np.zeros((n, nc))
    np.add.at(gain, lo, best_lo)
    np.add.at(gain, hi, best_hi)
    return inst.alpha + gain >= 0.0


def _labels_to_solution(lab, cl, nc, mode):
    return SolutionTriple.from_labels(lab, cl, nc, mode)


def heuristic_solution(inst: ProblemInstance, allowed=None):
    """Greedy joint merging plus single-candidate moves."""
    n, nc = inst.alpha.shape
    if allowed is None:
        allowed = ~dominated_classes(inst)
    single = inst.mode == Mode.SINGLE
    best = None
    starts = [kernels.greedy_start(inst.alpha, allowed, single)]
    if not single and n:
        lab, _ = kernels.greedy_start(inst.alpha, allowed, single)
        starts.append((lab, np.where(lab >= 0, 0, -1).astype(np.int64)))
    for lab, cl in starts:
        kernels.local_search(inst.alpha, inst.beta, allowed, lab, cl, single)
        sol = _labels_to_solution(lab, cl, nc, inst.mode)
        val = evaluate(inst, sol).total
        if best is None or val < best[1] - 1e-12:
            best = (sol, val)
    return best


# ---------------------------------------------------------------------------
# branch and cut


@dataclass(order=True)
class _Node:
    lb: float
    id: int
    fix_cols: tuple = field(compare=False, default=())
    fix_vals: tuple = field(compare=False, default=())
    depth: int = field(compare=False, default=0)


class _BranchAndCut:
    def __init__(self, inst: ProblemInstance, cfg: SolverConfig):
        self.inst, self.cfg = inst, cfg
        self.n, self.nc = inst.alpha.shape
        self.P = n_pairs(self.n)
        self.lo, self.hi = pair_arrays(self.n)
        self.single = inst.mode == Mode.SINGLE
        self.rng = np.random.default_rng(cfg.rng_seed)
        self.t0 = time.perf_counter()
        self.deadline = self.t0 + cfg.max_wall_time

        dom = dominated_classes(inst)
        self.allowed = ~dom
        self.n_fixed = int(dom.sum())
        sel_ok = self.allowed.any(axis=1)

        self.nx = self.n * self.nc
        self.ny = self.P
        backend = cfg.lp_backend
        if backend == "auto":
            est_rows = self.n + 2 * self.P
            est_cols = self.nx + self.ny + self.P * 2
            backend = "simplex" if est_rows * est_cols <= DENSE_LIMIT else "highs"
        self.backend = backend
        self.lp = make_lp(backend)
        self.lp.add_columns(inst.alpha.reshape(-1), 0.0, self.allowed.reshape(-1).astype(float))
        y_ub = (sel_ok[self.lo] & sel_ok[self.hi]).astype(float)
        self.lp.add_columns(np.zeros(self.P), 0.0, y_ub)
        self.base_lb = list(self.lp.lb)
        self.base_ub = list(self.lp.ub)

        # lazy z bookkeeping
        self.zcol = -np.ones((self.P, self.nc, self.nc), np.int64)
        self.z_active = self.allowed[self.lo][:, :, None] & self.allowed[self.hi][:, None, :] & (y_ub[:, None, None] > 0)
        self.z_neg = self.z_active & (inst.beta < 0)
        self.offset = float(inst.beta[self.z_neg].sum())
        self.lin_done = np.zeros((self.P, self.nc, self.nc), np.uint8)   # bitmask of sides
        # number of z columns covered by the last lifted row per (pair, class, side)
        self.lift_n = np.zeros((self.P, self.nc, 2), np.int64)
        self.clique_done = np.zeros(self.n, bool)
        self.supp_done = np.zeros((self.P, 2), bool)
        self.single_done = np.zeros(self.P, bool)
        self.tri_done = set()

        self.cuts = 0
        self.cols_added = 0
        self.lp_iters = 0
        self.incumbent = SolutionTriple.empty(self.n, self.nc, inst.mode)
        self.ub = 0.0
        self.log = []
        if cfg.preinstall_linearization:
            self._preinstall()

    # -- columns / rows -------------------------------------------------

    def _ensure_z(self, p, c, c2):
        """Add the given z variables (arrays) as LP columns if absent."""
        missing = self.zcol[p, c, c2] < 0
        if not np.any(missing):
            return
        p, c, c2 = p[missing], c[missing], c2[missing]
        key = np.unique(np.stack([p, c, c2], axis=1), axis=0)
        p, c, c2 = key[:, 0], key[:, 1], key[:, 2]
        cost = self.inst.beta[p, c, c2]
        start = self.lp.add_columns(cost, 0.0, 1.0)
        self.zcol[p, c, c2] = start + np.arange(p.shape[0])
        self.offset -= float(cost[self.z_neg[p, c, c2]].sum())
        self.base_lb.extend([0.0] * p.shape[0])
        self.base_ub.extend([1.0] * p.shape[0])
        self.cols_added += p.shape[0]

    def _xcol(self, d, c):
        return d * self.nc + c

    def _ycol(self, p):
        return self.nx + p

    def _preinstall(self):
        p, c, c2 = np.nonzero(self.z_active)
        self._ensure_z(p, c, c2)
        rows, rhs = [], []
        for pp, cc, cc2 in zip(p, c, c2):
            rows += self._lin_rows(int(pp), int(cc), int(cc2), 0b1111)
        for r in rows:
            rhs.append(r[2])
        self._push([(r[0], r[1]) for r in rows], rhs)
        self.lin_done[self.z_active] = 0b1111

    def _lin_rows(self, p, c, c2, mask):
        d, e = int(self.lo[p]), int(self.hi[p])
        z = int(self.zcol[p, c, c2])
        xa, xb, y = self._xcol(d, c), self._xcol(e, c2), self._ycol(p)
        out = []
        if mask & 1:
            out.append(([xa, xb, y, z], [1.0, 1.0, 1.0, -1.0], 2.0))
        if mask & 2:
            out.append(([z, xa], [1.0, -1.0], 0.0))
        if mask & 4:
            out.append(([z, xb], [1.0, -1.0], 0.0))
        if mask & 8:
            out.append(([z, y], [1.0, -1.0], 0.0))
        return out

    def _push(self, rows, rhs):
        if rows:
            self.lp.add_rows(rows, rhs)
            self.cuts += len(rows)
            self._maybe_switch_backend()

    def _maybe_switch_backend(self):
        if isinstance(self.lp, DualSimplex) and self.cfg.lp_backend == "auto":
            if self.lp.n_rows * self.lp.n_cols > DENSE_LIMIT:
                log.info("relaxation outgrew the dense simplex, switching to HiGHS")
                self.lp = to_highs(self.lp)
                self.backend = "highs"

    # -- separation -----------------------------------------------------

    def _split(self, v):
        xv = v[: self.nx].reshape(self.n, self.nc)
        yv = v[self.nx: self.nx + self.P]
        z = np.where(self.z_neg, 1.0, 0.0)
        # columns added after ``v`` was computed still sit at their sign-rule value
        have = (self.zcol >= 0) & (self.zcol < v.shape[0])
        z[have] = v[self.zcol[have]]
        return xv, yv, z

    def _separate(self, v, integral):
        """Violated rows at LP point ``v`` as ``[(amount, kind_rank, row, rhs)]``."""
        xv, yv, z = self._split(v)
        found = []   # (amount, tie key, builder)
        lo, hi = self.lo, self.hi
        sx = xv.sum(axis=1)

        # uniqueness (clique form over all classes of a candidate)
        for d in np.nonzero((sx > 1 + SEP_TOL) & ~self.clique_done)[0]:
            found.append((sx[d] - 1, (0, int(d)), ("clique", int(d))))
        # suppression
        for side, ends in ((0, lo), (1, hi)):
            amt = yv - sx[ends]
            for p in np.nonzero((amt > SEP_TOL) & ~self.supp_done[:, side])[0]:
                found.append((amt[p], (1, int(p), side), ("supp", int(p), side)))
        # single person (aggregated over classes)
        if self.single and self.P:
            amt = sx[lo] + sx[hi] - 1 - yv
            for p in np.nonzero((amt > SEP_TOL) & ~self.single_done)[0]:
                found.append((amt[p], (4, int(p)), ("single", int(p))))
        # linearization
        if self.P:
            xa = xv[lo][:, :, None]
            xb = xv[hi][:, None, :]
            yy = yv[:, None, None]
            act = self.z_active
            for bit, amt in (
                (1, xa + xb + yy - 2 - z),
                (2, z - xa),
                (4, z - xb),
                (8, z - yy),
            ):
                hit = act & (amt > SEP_TOL) & ((self.lin_done & bit) == 0)
                for p, c, c2 in zip(*np.nonzero(hit)):
                    found.append((amt[p, c, c2], (3, int(p), int(c), int(c2), bit), ("lin", int(p), int(c), int(c2), bit)))
            if self.cfg.lifted_rows:
                # sum_c' z_{p c c'} <= x_{lo c}  and  sum_c z_{p c c'} <= x_{hi c'}
                pos = (z > 0) | (self.zcol >= 0)
                for side, amt, cnt in (
                    (0, z.sum(axis=2) - xv[lo], pos.sum(axis=2)),
                    (1, z.sum(axis=1) - xv[hi], pos.sum(axis=1)),
                ):
                    hit = (amt > SEP_TOL) & (cnt > self.lift_n[:, :, side])
                    for p, c in zip(*np.nonzero(hit)):
                        found.append((amt[p, c], (5, int(p), int(c), side), ("lift", int(p), int(c), side)))
        # transitivity
        if integral:
            sol = SolutionTriple(np.zeros((self.n, self.nc), np.int8), np.round(yv).astype(np.int8), Mode.MULTI)
            for vio in constraints.separate_transitivity(sol):
                if vio.indices not in self.tri_done:
                    found.append((1.0, (2,) + vio.indices, ("tri",) + vio.indices))
        elif self.cfg.fractional_separation:
            trip, amt = kernels.triangle_scan(yv, self.n, SEP_TOL)
            for t, a in zip(trip, amt):
                t = tuple(int(q) for q in t)
                if t not in self.tri_done:
                    found.append((float(a), (2,) + t, ("tri",) + t))
        found.sort(key=lambda f: (-f[0], f[1]))
        return found[: self.cfg.max_cuts_per_round], z

    def _install(self, found, z):
        # columns first
        need = [(f[2][1], f[2][2], f[2][3]) for f in found if f[2][0] == "lin"]
        for f in found:
            if f[2][0] == "lift":
                _, p, c, side = f[2]
                if side == 0:
                    cs = np.nonzero(z[p, c, :] > 0)[0]
                    need += [(p, c, c2) for c2 in cs]
                else:
                    cs = np.nonzero(z[p, :, c] > 0)[0]
                    need += [(p, c1, c) for c1 in cs]
        if need:
            arr = np.array(need, dtype=np.int64)
            self._ensure_z(arr[:, 0], arr[:, 1], arr[:, 2])
        rows, rhs = [], []
        for _, _, b in found:
            k = b[0]
            if k == "clique":
                d = b[1]
                rows.append(([self._xcol(d, c) for c in range(self.nc)], [1.0] * self.nc))
                rhs.append(1.0)
                self.clique_done[d] = True
            elif k == "supp":
                _, p, side = b
                d = int(self.lo[p] if side == 0 else self.hi[p])
                rows.append(([self._ycol(p)] + [self._xcol(d, c) for c in range(self.nc)], [1.0] + [-1.0] * self.nc))
                rhs.append(0.0)
                self.supp_done[p, side] = True
            elif k == "single":
                p = b[1]
                d, e = int(self.lo[p]), int(self.hi[p])
                idx = [self._xcol(d, c) for c in range(self.nc)] + [self._xcol(e, c) for c in range(self.nc)]
                rows.append((idx + [self._ycol(p)], [1.0] * (2 * self.nc) + [-1.0]))
                rhs.append(1.0)
                self.single_done[p] = True
            elif k == "lin":
                _, p, c, c2, bit = b
                (idx, val, r), = self._lin_rows(p, c, c2, bit)
                rows.append((idx, val))
                rhs.append(r)
                self.lin_done[p, c, c2] |= bit
            elif k == "lift":
                _, p, c, side = b
                d = int(self.lo[p] if side == 0 else self.hi[p])
                zc = self.zcol[p, c, :] if side == 0 else self.zcol[p, :, c]
                zc = [int(q) for q in zc if q >= 0]
                self.lift_n[p, c, side] = len(zc)
                rows.append((zc + [self._xcol(d, c)], [1.0] * len(zc) + [-1.0]))
                rhs.append(0.0)
            else:
                _, a, m, c = b
                rows.append((
                    [self._ycol(_pidx(a, m, self.n)), self._ycol(_pidx(m, c, self.n)), self._ycol(_pidx(a, c, self.n))],
                    [1.0, 1.0, -1.0],
                ))
                rhs.append(1.0)
                self.tri_done.add((a, m, c))
        self._push(rows, rhs)
        return len(rows)

    # -- incumbents -----------------------------------------------------

    def _offer(self, sol: SolutionTriple, source: str):
        if constraints.check_all(sol):
            return False
        val = evaluate(self.inst, sol).total
        if val < self.ub - 1e-12:
            self.ub = val
            self.incumbent = sol
            log.debug("incumbent %.6f from %s", val, source)
            return True
        return False

    def _round(self, v):
        """Round an integral-x point: join candidates by components of y >= 0.5, then polish."""
        xv, yv, _ = self._split(v)
        lab = np.where(xv.max(axis=1) > 0.5, np.argmax(xv, axis=1), -1).astype(np.int64)
        if self.single:
            cl = np.where(lab >= 0, 0, -1).astype(np.int64)
        else:
            cl = _components(self.n, self.lo, self.hi, (yv >= 0.5) & (lab[self.lo] >= 0) & (lab[self.hi] >= 0))
            cl = np.where(lab >= 0, cl, -1).astype(np.int64)
        self._offer(_labels_to_solution(lab, cl, self.nc, self.inst.mode), "rounding")
        if self.cfg.heuristics:
            kernels.local_search(self.inst.alpha, self.inst.beta, self.allowed, lab, cl, self.single, 5)
            self._offer(_labels_to_solution(lab, cl, self.nc, self.inst.mode), "rounding+search")

    # -- main loop ------------------------------------------------------

    def _out_of_time(self):
        return time.perf_counter() - self.t0 > self.cfg.max_wall_time

    def _set_node_bounds(self, node):
        lb = np.array(self.base_lb)
        ub = np.array(self.base_ub)
        for col, val in zip(node.fix_cols, node.fix_vals):
            lb[col] = ub[col] = val
        self.lp.set_bounds(lb, ub)

    def _process(self, node):
        """Cut loop at one node.

        Returns ``(lb, point or None, integral flag, cuts added, interrupted)``;
        an interrupted node ran out of time and keeps only the bound reached.
        """
        self._set_node_bounds(node)
        added = 0
        lb = node.lb
        history = []
        v = None
        for rnd in range(self.cfg.max_rounds_per_node):
            res = self.lp.solve(deadline=self.deadline)
            self.lp_iters += res.iterations
            if res.status == INFEASIBLE:
                return np.inf, None, False, added, False
            if res.status == TIME_LIMIT:
                return lb, v, False, added, True
            if res.status == ITERATION_LIMIT:
                if isinstance(self.lp, HighsLP):
                    return lb, v, False, added, True
                # fall back to a sparse cold solve
                self.lp = to_highs(self.lp)
                self.backend = "highs"
                self._set_node_bounds(node)
                continue
            v = res.x
            lb = max(lb, res.objective + self.offset)
            if lb >= self.ub - 1e-9:
                return lb, None, False, added, False
            xy = v[: self.nx + self.P]
            integral = bool(np.all(np.minimum(np.abs(xy), np.abs(1 - xy)) <= INT_TOL))
            found, z = self._separate(v, integral)
            if not found:
                return lb, v, integral, added, False
            added += self._install(found, z)
            if self._out_of_time():
                return lb, v, False, added, True
            history.append(lb)
            # tailing off on fractional points: branch instead of cutting forever
            if not integral and len(history) > 8 and history[-1] - history[-9] < 1e-6 * max(1.0, abs(lb)):
                found_struct = [f for f in found if f[2][0] in ("lin", "lift", "clique", "supp", "single")]
                if not found_struct:
                    return lb, v, False, added, False
        return lb, v, False, added, False

    def _branch_var(self, v):
        xv = v[: self.nx]
        fx = np.abs(xv - 0.5)
        frac = fx < 0.5 - INT_TOL
        if np.any(frac):
            cand = np.nonzero(frac)[0]
            best = fx[cand].min()
            return int(cand[np.nonzero(fx[cand] <= best + 1e-12)[0][0]])
        yv = v[self.nx: self.nx + self.P]
        fy = np.abs(yv - 0.5)
        frac = fy < 0.5 - INT_TOL
        if np.any(frac):
            cand = np.nonzero(frac)[0]
            best = fy[cand].min()
            return self.nx + int(cand[np.nonzero(fy[cand] <= best + 1e-12)[0][0]])
        return None

    def _global_lb(self, heap):
        lb = min((nd.lb for nd in heap), default=self.ub)
        return min(lb, self.ub)

    def run(self):
        cfg = self.cfg
        if cfg.heuristics and self.n:
            sol, _ = heuristic_solution(self.inst, self.allowed)
            self._offer(sol, "root heuristic")
        # trivial relaxation: every negative cost taken, z columns already in the LP included
        root_lb = self.offset + float(np.minimum(self.inst.alpha, 0.0)[self.allowed].sum())
        root_lb += float(np.minimum(self.inst.beta[self.zcol >= 0], 0.0).sum())
        heap = [_Node(root_lb, 0)]
        next_id = 1
        nodes = 0
        status = None
        glb = min(root_lb, self.ub)
        while heap:
            if nodes >= cfg.max_nodes or self._out_of_time():
                status = Status.LIMIT
                break
            node = heapq.heappop(heap)
            if node.lb >= self.ub - 1e-9:
                nodes += 1
                continue
            lb, v, integral, added, interrupted = self._process(node)
            nodes += 1
            if interrupted:
                if v is not None and np.all(np.minimum(np.abs(v[: self.nx]), np.abs(1 - v[: self.nx])) <= INT_TOL):
                    self._round(v)
                if lb < self.ub - 1e-9:
                    heapq.heappush(heap, _Node(lb, node.id, node.fix_cols, node.fix_vals, node.depth))
            elif v is not None:
                if integral:
                    xy = np.round(v[: self.nx + self.P]).astype(np.int8)
                    sol = SolutionTriple(xy[: self.nx].reshape(self.n, self.nc), xy[self.nx:], self.inst.mode)
                    self._offer(sol, "lp")
                else:
                    xv = v[: self.nx]
                    if np.all(np.minimum(np.abs(xv), np.abs(1 - xv)) <= INT_TOL):
                        self._round(v)
                    col = self._branch_var(v)
                    if col is not None and lb < self.ub - 1e-9:
                        for val in (1.0, 0.0):
                            heapq.heappush(heap, _Node(
                                lb, next_id, node.fix_cols + (col,), node.fix_vals + (val,), node.depth + 1,
                            ))
                            next_id += 1
                    elif col is None and lb < self.ub - 1e-9:
                        # integral but interrupted before separation finished: revisit
                        heapq.heappush(heap, _Node(lb, next_id, node.fix_cols, node.fix_vals, node.depth))
                        next_id += 1
            glb = max(glb, self._global_lb(heap)) if heap else self.ub
            glb = min(glb, self.ub)
            gap = relative_gap(self.ub, glb)
            self.log.append({
                "node": node.id, "lb": glb, "ub": self.ub, "gap": gap, "cuts": added,
            })
            if gap <= cfg.gap_tolerance and heap:
                status = Status.OPTIMAL if gap == 0.0 else Status.GAP_REACHED
                break
        if status is None:
            status = Status.OPTIMAL
            glb = self.ub
        gap = relative_gap(self.ub, glb)
        report = SolverReport(
            best_objective=float(evaluate(self.inst, self.incumbent).total),
            lower_bound=float(glb),
            gap=gap,
            nodes_explored=nodes,
            cuts_added=self.cuts,
            lp_iterations=self.lp_iters,
            status=status,
            wall_time=time.perf_counter() - self.t0,
            columns_added=self.cols_added,
            backend=self.backend,
            fixed_by_dominance=self.n_fixed,
            log=self.log,
        )
        return self.incumbent, report


def _pidx(i, j, n):
    if i > j:
        i, j = j, i
    return i * n - i * (i + 1) // 2 + j - i - 1


def _components(n, lo, hi, edge_mask):
    parent = np.arange(n)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in zip(lo[edge_mask], hi[edge_mask]):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return np.array([find(a) for a in range(n)], dtype=np.int64)


def solve(inst: ProblemInstance, cfg: SolverConfig | None = None):
    """Minimize the joint objective. Returns ``(SolutionTriple, SolverReport)``."""
    cfg = cfg or SolverConfig()
    return _BranchAndCut(inst, cfg).run()


# ---------------------------------------------------------------------------
# poses


def extract_poses(sol: SolutionTriple, dets: DetectionSet) -> PoseResult:
    """Persons from the components of ``y``.

    Several selected candidates of one class in a person merge into their
    unary-probability-weighted centroid; classes without a candidate are
    reported as occluded (None).
    """
    if sol.x.shape != (len(dets), dets.n_classes):
        raise ValueError("solution does not match the detection set")
    if constraints.check_all(sol):
        raise ValueError("cannot extract poses from an infeasible solution")
    n = sol.n
    lab = sol.labels()
    lo, hi = pair_arrays(n)
    comp = _components(n, lo, hi, sol.y.astype(bool))
    xy = dets.xy
    un = dets.unary
    persons = []
    for root in sorted(set(comp[lab >= 0].tolist())):
        members = np.nonzero((comp == root) & (lab >= 0))[0]
        parts = []
        for c in range(dets.n_classes):
            m = members[lab[members] == c]
            if m.size == 0:
                parts.append(None)
                continue
            w = un[m, c]
            pt = (w[:, None] * xy[m]).sum(axis=0) / w.sum()
            parts.append((float(pt[0]), float(pt[1])))
        score = float(np.mean(un[members, lab[members]]))
        persons.append(Person(tuple(parts), score, tuple(int(m) for m in members)))
    return PoseResult(tuple(persons), dets.classes)
