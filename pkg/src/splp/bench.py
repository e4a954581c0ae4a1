"""Timing table: compiled vs uncompiled kernels, and the large multi-person solve."""
from __future__ import annotations

import time

import numpy as np

from . import kernels, lp
from ._accel import HAVE_NUMBA
from .detections import NoiseConfig, generate_scene, make_rng, make_scene, select_subset
from .model import Mode, n_pairs, random_instance
from .objective import build_instance
from .pairwise import TrainingConfig, train_model
from .solver import SolverConfig, solve


def _best_of(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def _py(f):
    return getattr(f, "py_func", f)


def _lp_problem(rng, m=120, n=160):
    A = rng.uniform(0.0, 1.0, size=(m, n)) * (rng.random((m, n)) < 0.2)
    rows = [(np.nonzero(r)[0], r[np.nonzero(r)[0]]) for r in A]
    return rows, rng.uniform(1.0, 3.0, size=m), -rng.uniform(0.0, 1.0, size=n)


def _solve_lp(rows, rhs, cost, loop):
    saved = lp._dual_loop
    lp._dual_loop = loop
    try:
        s = lp.DualSimplex()
        s.add_columns(cost, 0.0, 1.0)
        s.add_rows(rows, rhs)
        return s.solve()
    finally:
        lp._dual_loop = saved


def kernel_table(repeats=3, seed=0, skip_python=False):
    rng = make_rng(seed)
    rows = []
    n = 60
    y = rng.random(n_pairs(n))
    small = random_instance(rng, 7, 2)
    big = random_instance(rng, 100, 14)
    allowed = np.ones(big.alpha.shape, bool)
    lp_rows, lp_rhs, lp_cost = _lp_problem(rng)

    def local(f):
        lab, cl = kernels.greedy_start(big.alpha, allowed, False)
        f(big.alpha, big.beta, allowed, lab, cl, False, 20)

    cases = [
        ("triangle scan |D|=60", lambda: kernels._triangle_scan_jit(y, n, 1e-9),
         lambda: kernels._triangle_scan_numpy(y, n, 1e-9)),
        ("brute force |D|=7 |C|=2", lambda: kernels._brute_force_jit(small.alpha, small.beta, False),
         lambda: _py(kernels._brute_force_jit)(small.alpha, small.beta, False)),
        ("local search |D|=100 |C|=14", lambda: local(kernels._local_search_jit),
         lambda: local(_py(kernels._local_search_jit))),
        ("dual simplex 120x160", lambda: _solve_lp(lp_rows, lp_rhs, lp_cost, lp._dual_loop),
         lambda: _solve_lp(lp_rows, lp_rhs, lp_cost, _py(lp._dual_loop))),
    ]
    for name, fast, slow in cases:
        fast()   # compile outside the timed region
        t_fast = _best_of(fast, repeats)
        t_slow = np.nan if skip_python else _best_of(slow, max(1, repeats // 3))
        rows.append({"kernel": name, "compiled_s": t_fast, "python_s": t_slow,
                     "speedup": t_slow / t_fast if t_fast > 0 else np.nan})
    return rows


def solve_table(time_limit=900.0, seed=0, runs=1, k=100):
    """Multi-person solves at the default operating point (|D| = k, 14 classes)."""
    rng = make_rng([seed, 1])
    train = []
    for i in range(20):
        gt = make_scene(rng, int(rng.integers(2, 5)))
        train.append(generate_scene(gt, NoiseConfig(rng_seed=seed * 1000 + i), rng))
    model = train_model(train, 14, TrainingConfig())
    out = []
    for r in range(runs):
        gt = make_scene(rng, 4)
        dets = select_subset(generate_scene(gt, NoiseConfig(clutter_rate=10.0, dup_mean=3.0), rng), k)
        inst = build_instance(dets, model, Mode.MULTI)
        t = time.perf_counter()
        _, rep = solve(inst, SolverConfig(max_wall_time=time_limit))
        out.append({
            "run": r, "D": inst.n, "C": inst.n_classes, "status": rep.status.value,
            "objective": rep.best_objective, "lower_bound": rep.lower_bound, "gap": rep.gap,
            "nodes": rep.nodes_explored, "cuts": rep.cuts_added, "columns": rep.columns_added,
            "backend": rep.backend, "seconds": time.perf_counter() - t, "time_limit": time_limit,
        })
    return out


def run_bench(repeats=3, time_limit=900.0, seed=0, skip_python=False, solve_runs=1, k=100):
    kt = kernel_table(repeats, seed, skip_python)
    st = solve_table(time_limit, seed, solve_runs, k) if solve_runs > 0 else []
    lines = [f"numba {'enabled' if HAVE_NUMBA else 'disabled'}", "",
             f"{'kernel':30s} {'compiled s':>11s} {'python s':>11s} {'speedup':>8s}"]
    for r in kt:
        lines.append(f"{r['kernel']:30s} {r['compiled_s']:11.5f} {r['python_s']:11.5f} {r['speedup']:8.1f}")
    if st:
        lines += ["", f"{'|D|':>4s} {'|C|':>4s} {'status':>12s} {'objective':>12s} {'bound':>12s} "
                      f"{'gap':>8s} {'nodes':>6s} {'cuts':>8s} {'seconds':>8s}"]
        for r in st:
            lines.append(
                f"{r['D']:4d} {r['C']:4d} {r['status']:>12s} {r['objective']:12.3f} {r['lower_bound']:12.3f} "
                f"{r['gap']:8.4f} {r['nodes']:6d} {r['cuts']:8d} {r['seconds']:8.1f}"
            )
    return {"numba": HAVE_NUMBA, "kernels": kt, "solves": st}, "\n".join(lines)
