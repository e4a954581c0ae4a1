"""Hot loops.

Each kernel is compiled with numba when available. With ``SPLP_DISABLE_NUMBA=1``
the same source runs as plain Python, except the triangle scan which has a
vectorized numpy twin. ``kernel.py_func`` reaches the uncompiled version
when numba is active (used by the benchmark).
"""
import numpy as np

from ._accel import HAVE_NUMBA, njit


@njit(cache=True)
def _pidx(i, j, n):
    # caller guarantees i < j
    return i * n - i * (i + 1) // 2 + j - i - 1


@njit(cache=True)
def _beta_at(beta, d, e, cd, ce, n):
    if d < e:
        return beta[_pidx(d, e, n), cd, ce]
    return beta[_pidx(e, d, n), ce, cd]


# ---------------------------------------------------------------------------
# triangle inequalities  y_ab + y_bc - y_ac <= 1  (b is the apex)


@njit(cache=True)
def _triangle_scan_jit(y, n, eps):
    cnt = 0
    for i in range(n):
        for j in range(i + 1, n):
            yij = y[_pidx(i, j, n)]
            for k in range(j + 1, n):
                yik = y[_pidx(i, k, n)]
                yjk = y[_pidx(j, k, n)]
                if yij + yjk - yik > 1.0 + eps:
                    cnt += 1
                if yij + yik - yjk > 1.0 + eps:
                    cnt += 1
                if yik + yjk - yij > 1.0 + eps:
                    cnt += 1
    out = np.empty((cnt, 3), np.int64)
    amt = np.empty(cnt, np.float64)
    t = 0
    for i in range(n):
        for j in range(i + 1, n):
            yij = y[_pidx(i, j, n)]
            for k in range(j + 1, n):
                yik = y[_pidx(i, k, n)]
                yjk = y[_pidx(j, k, n)]
                v = yij + yjk - yik
                if v > 1.0 + eps:
                    out[t, 0] = i
                    out[t, 1] = j
                    out[t, 2] = k
                    amt[t] = v - 1.0
                    t += 1
                v = yij + yik - yjk
                if v > 1.0 + eps:
                    out[t, 0] = j
                    out[t, 1] = i
                    out[t, 2] = k
                    amt[t] = v - 1.0
                    t += 1
                v = yik + yjk - yij
                if v > 1.0 + eps:
                    out[t, 0] = i
                    out[t, 1] = k
                    out[t, 2] = j
                    amt[t] = v - 1.0
                    t += 1
    return out, amt


def _triangle_scan_numpy(y, n, eps):
    Y = np.zeros((n, n))
    lo, hi = np.triu_indices(n, 1)
    Y[lo, hi] = y
    Y[hi, lo] = y
    trip, amt = [], []
    for b in range(n):
        # a < c, both != b
        v = Y[:, b][:, None] + Y[b, :][None, :] - Y
        v[b, :] = -np.inf
        v[:, b] = -np.inf
        a, c = np.nonzero(np.triu(v > 1.0 + eps, 1))
        trip.append(np.stack([a, np.full_like(a, b), c], axis=1))
        amt.append(v[a, c] - 1.0)
    if not trip:
        return np.empty((0, 3), np.int64), np.empty(0)
    trip = np.concatenate(trip).astype(np.int64)
    amt = np.concatenate(amt)
    # same ordering as the compiled scan
    key = np.lexsort((trip[:, 1], np.max(trip, axis=1), np.median(trip, axis=1), np.min(trip, axis=1)))
    return trip[key], amt[key]


def triangle_scan(y, n, eps=1e-9):
    """All violated triangle inequalities at ``y`` as (a, apex, c) rows plus amounts."""
    y = np.ascontiguousarray(y, dtype=np.float64)
    if n < 3:
        return np.empty((0, 3), np.int64), np.empty(0)
    if HAVE_NUMBA:
        return _triangle_scan_jit(y, n, eps)
    return _triangle_scan_numpy(y, n, eps)


# ---------------------------------------------------------------------------
# exhaustive search over labelings x partitions


@njit(cache=True)
def _brute_force_jit(alpha, beta, single):
    n, nc = alpha.shape
    best = 0.0
    best_lab = -np.ones(n, np.int64)
    best_blk = -np.ones(n, np.int64)
    if n == 0:
        return best, best_lab, best_blk
    lab = -np.ones(n, np.int64)
    blk = -np.ones(n, np.int64)
    opt = np.zeros(n, np.int64)      # next option index per level
    cost = np.zeros(n + 1)           # cost of levels < i
    nb = np.zeros(n + 1, np.int64)   # number of blocks opened before level i
    i = 0
    while i >= 0:
        if single:
            n_opt = 1 + nc
        else:
            n_opt = 1 + nc * (nb[i] + 1)
        o = opt[i]
        if o >= n_opt:
            opt[i] = 0
            i -= 1
            continue
        opt[i] = o + 1
        if o == 0:
            lab[i] = -1
            blk[i] = -1
            inc = 0.0
            nb[i + 1] = nb[i]
        else:
            c = (o - 1) % nc
            b = 0 if single else (o - 1) // nc
            lab[i] = c
            blk[i] = b
            inc = alpha[i, c]
            for j in range(i):
                if blk[j] == b:
                    inc += beta[_pidx(j, i, n), lab[j], c]
            nb[i + 1] = nb[i] + 1 if (not single and b == nb[i]) else nb[i]
        cost[i + 1] = cost[i] + inc
        if i == n - 1:
            if cost[n] < best - 1e-12:
                best = cost[n]
                best_lab[:] = lab
                best_blk[:] = blk
        else:
            i += 1
    return best, best_lab, best_blk


def brute_force_labels(alpha, beta, single):
    return _brute_force_jit(
        np.ascontiguousarray(alpha, np.float64), np.ascontiguousarray(beta, np.float64), bool(single)
    )


# ---------------------------------------------------------------------------
# primal heuristic: greedy joint merging followed by single-candidate moves


@njit(cache=True)
def _cost_of(alpha, beta, lab, cl, n):
    tot = 0.0
    for d in range(n):
        if lab[d] >= 0:
            tot += alpha[d, lab[d]]
            for e in range(d + 1, n):
                if lab[e] >= 0 and cl[e] == cl[d]:
                    tot += beta[_pidx(d, e, n), lab[d], lab[e]]
    return tot


@njit(cache=True)
def _greedy_merge(beta, lab, cl, n):
    # W[k, l] = summed cost between clusters k and l (cluster ids are < n)
    W = np.zeros((n, n))
    alive = np.zeros(n, np.bool_)
    for d in range(n):
        if lab[d] >= 0:
            alive[cl[d]] = True
    for d in range(n):
        if lab[d] < 0:
            continue
        for e in range(d + 1, n):
            if lab[e] < 0 or cl[e] == cl[d]:
                continue
            w = beta[_pidx(d, e, n), lab[d], lab[e]]
            W[cl[d], cl[e]] += w
            W[cl[e], cl[d]] += w
    merged = False
    while True:
        bk, bl, bw = -1, -1, -1e-12
        for k in range(n):
            if not alive[k]:
                continue
            for l in range(k + 1, n):
                if alive[l] and W[k, l] < bw:
                    bk, bl, bw = k, l, W[k, l]
        if bk < 0:
            break
        merged = True
        for d in range(n):
            if lab[d] >= 0 and cl[d] == bl:
                cl[d] = bk
        alive[bl] = False
        for m in range(n):
            if alive[m] and m != bk:
                W[bk, m] += W[bl, m]
                W[m, bk] = W[bk, m]
        for m in range(n):
            W[bl, m] = 0.0
            W[m, bl] = 0.0
    return merged


@njit(cache=True)
def _move_sweeps(alpha, beta, allowed, lab, cl, n, single, max_sweeps):
    nc = alpha.shape[1]
    acc = np.zeros((n, nc))
    size = np.zeros(n, np.int64)
    moved_any = False
    for _ in range(max_sweeps):
        improved = False
        for d in range(n):
            size[:] = 0
            for e in range(n):
                if e != d and lab[e] >= 0:
                    size[cl[e]] += 1
            acc[:, :] = 0.0
            for e in range(n):
                if e == d or lab[e] < 0:
                    continue
                k = cl[e]
                for c in range(nc):
                    acc[k, c] += _beta_at(beta, d, e, c, lab[e], n)
            if lab[d] >= 0:
                cur = alpha[d, lab[d]] + acc[cl[d], lab[d]]
            else:
                cur = 0.0
            best = 0.0
            bc, bk = -1, -1
            # free cluster id for a new singleton
            free = -1
            for k in range(n):
                if size[k] == 0:
                    free = k
                    break
            for k in range(n):
                if size[k] == 0:
                    continue
                if single and k != 0:
                    continue
                for c in range(nc):
                    if allowed[d, c]:
                        v = alpha[d, c] + acc[k, c]
                        if v < best - 1e-12:
                            best, bc, bk = v, c, k
            has_other = False
            for k in range(n):
                if size[k] > 0:
                    has_other = True
                    break
            if (not single) or (not has_other):
                tgt = 0 if single else free
                for c in range(nc):
                    if allowed[d, c] and alpha[d, c] < best - 1e-12:
                        best, bc, bk = alpha[d, c], c, tgt
            if best < cur - 1e-10:
                lab[d] = bc
                cl[d] = bk if bc >= 0 else -1
                improved = True
                moved_any = True
        if not improved:
            break
    return moved_any


@njit(cache=True)
def _local_search_jit(alpha, beta, allowed, lab, cl, single, max_rounds):
    n = alpha.shape[0]
    for _ in range(max_rounds):
        merged = False
        if not single:
            merged = _greedy_merge(beta, lab, cl, n)
        moved = _move_sweeps(alpha, beta, allowed, lab, cl, n, single, 50)
        if not (merged or moved):
            break
    return _cost_of(alpha, beta, lab, cl, n)


def local_search(alpha, beta, allowed, labels, clusters, single, max_rounds=20):
    """Improve a labeling/clustering in place; returns the objective reached."""
    return _local_search_jit(
        np.ascontiguousarray(alpha, np.float64),
        np.ascontiguousarray(beta, np.float64),
        np.ascontiguousarray(allowed, np.bool_),
        labels, clusters, bool(single), int(max_rounds),
    )


def greedy_start(alpha, allowed, single):
    """Every candidate at its cheapest class when that is profitable; singletons."""
    n, nc = alpha.shape
    masked = np.where(allowed, alpha, np.inf)
    lab = np.argmin(masked, axis=1).astype(np.int64) if nc else np.zeros(n, np.int64)
    best = masked[np.arange(n), lab] if n else np.zeros(0)
    lab[~(best < 0)] = -1
    if single:
        cl = np.where(lab >= 0, 0, -1).astype(np.int64)
    else:
        cl = np.where(lab >= 0, np.arange(n), -1).astype(np.int64)
    return lab, cl
