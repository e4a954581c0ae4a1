"""Feasibility checks and violated-inequality separation.

Inequality families (all written as ``lhs <= rhs``):

* UNIQUENESS      ``x_dc + x_dc' <= 1``
* SUPPRESSION     ``y_dd' <= sum_c x_dc``  (one row per endpoint)
* TRANSITIVITY    ``y_ab + y_bc - 1 <= y_ac``
* LINEARIZATION   ``x_dc + x_d'c' + y_dd' - 2 <= z``, ``z <= x_dc``, ``z <= x_d'c'``, ``z <= y_dd'``
* SINGLE_PERSON   ``x_dc + x_d'c' - 1 <= y_dd'``  (single-person mode only)
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import Mode, SolutionTriple, pair_arrays, pair_index

MAX_CUTS = 10_000


class Kind(enum.IntEnum):
    UNIQUENESS = 0
    SUPPRESSION = 1
    TRANSITIVITY = 2
    LINEARIZATION = 3
    SINGLE_PERSON = 4


class Side(enum.IntEnum):
    """Which of the four linearization rows is meant."""

    LOWER = 0
    X_FIRST = 1
    X_SECOND = 2
    Y = 3


@dataclass(frozen=True, order=True)
class Violation:
    """One violated inequality.

    ``indices`` per kind:

    * UNIQUENESS     ``(d, c, c')`` with ``c < c'``
    * SUPPRESSION    ``(d, d')``: ``d`` is the endpoint whose labels bound ``y_dd'``
    * TRANSITIVITY   ``(a, b, c)``: ``y_ab + y_bc - 1 <= y_ac``, ``b`` is the apex
    * LINEARIZATION  ``(d, d', c, c', side)`` with ``d < d'``
    * SINGLE_PERSON  ``(d, d', c, c')`` with ``d < d'``
    """

    kind: Kind
    indices: tuple
    amount: float = 1.0

    def row(self, n: int, n_classes: int):
        """The inequality as ``({var: coef}, rhs)`` over ``('x', d, c)``, ``('y', p)``, ``('z', p, c, c')``."""
        k, ix = self.kind, self.indices
        if k == Kind.UNIQUENESS:
            d, c, c2 = ix
            return {("x", d, c): 1.0, ("x", d, c2): 1.0}, 1.0
        if k == Kind.SUPPRESSION:
            d, e = ix
            row = {("x", d, c): -1.0 for c in range(n_classes)}
            row[("y", pair_index(d, e, n))] = 1.0
            return row, 0.0
        if k == Kind.TRANSITIVITY:
            a, b, c = ix
            return {
                ("y", pair_index(a, b, n)): 1.0,
                ("y", pair_index(b, c, n)): 1.0,
                ("y", pair_index(a, c, n)): -1.0,
            }, 1.0
        if k == Kind.SINGLE_PERSON:
            d, e, c, c2 = ix
            return {("x", d, c): 1.0, ("x", e, c2): 1.0, ("y", pair_index(d, e, n)): -1.0}, 1.0
        d, e, c, c2, side = ix
        p = pair_index(d, e, n)
        z = ("z", p, c, c2)
        if side == Side.LOWER:
            return {("x", d, c): 1.0, ("x", e, c2): 1.0, ("y", p): 1.0, z: -1.0}, 2.0
        if side == Side.X_FIRST:
            return {z: 1.0, ("x", d, c): -1.0}, 0.0
        if side == Side.X_SECOND:
            return {z: 1.0, ("x", e, c2): -1.0}, 0.0
        return {z: 1.0, ("y", p): -1.0}, 0.0


def row_activity(row, rhs, sol: SolutionTriple) -> float:
    """``lhs - rhs`` of a violation row at an integral solution (``> 0`` means violated)."""
    n = sol.n
    lo, hi = pair_arrays(n)
    val = 0.0
    for key, coef in row.items():
        if key[0] == "x":
            _, d, c = key
            val += coef * sol.x[d, c]
        elif key[0] == "y":
            val += coef * sol.y[key[1]]
        else:
            _, p, c, c2 = key
            val += coef * sol.x[lo[p], c] * sol.x[hi[p], c2] * sol.y[p]
    return val - rhs


# ---------------------------------------------------------------------------
# checkers on integral solutions


def check_uniqueness(sol: SolutionTriple) -> list[Violation]:
    out = []
    for d in np.nonzero(sol.x.sum(axis=1) > 1)[0]:
        act = np.nonzero(sol.x[d])[0]
        for i, c in enumerate(act):
            for c2 in act[i + 1:]:
                out.append(Violation(Kind.UNIQUENESS, (int(d), int(c), int(c2))))
    return out


def check_suppression(sol: SolutionTriple) -> list[Violation]:
    lo, hi = pair_arrays(sol.n)
    sel = sol.x.sum(axis=1) > 0
    out = []
    for p in np.nonzero(sol.y)[0]:
        d, e = int(lo[p]), int(hi[p])
        if not sel[d]:
            out.append(Violation(Kind.SUPPRESSION, (d, e)))
        if not sel[e]:
            out.append(Violation(Kind.SUPPRESSION, (e, d)))
    return out


def check_transitivity(sol: SolutionTriple) -> list[Violation]:
    """Every violated triple (exhaustive)."""
    trip, _ = kernels.triangle_scan(sol.y.astype(float), sol.n, 0.5)
    return [Violation(Kind.TRANSITIVITY, tuple(int(v) for v in t)) for t in trip]


def check_single_person(sol: SolutionTriple) -> list[Violation]:
    if sol.mode != Mode.SINGLE:
        return []
    lo, hi = pair_arrays(sol.n)
    out = []
    for p in np.nonzero(sol.y == 0)[0]:
        d, e = int(lo[p]), int(hi[p])
        for c in np.nonzero(sol.x[d])[0]:
            for c2 in np.nonzero(sol.x[e])[0]:
                out.append(Violation(Kind.SINGLE_PERSON, (d, e, int(c), int(c2))))
    return out


def check_linearization(x, y, z, eps=1e-9) -> list[Violation]:
    """Check the four linearization rows at possibly fractional ``x``, ``y``, ``z``.

    ``z`` has shape ``(pairs, |C|, |C|)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    n = x.shape[0]
    lo, hi = pair_arrays(n)
    xa = x[lo][:, :, None]
    xb = x[hi][:, None, :]
    yy = y[:, None, None]
    tests = (
        (Side.LOWER, xa + xb + yy - 2.0 - z),
        (Side.X_FIRST, z - xa),
        (Side.X_SECOND, z - xb),
        (Side.Y, z - yy),
    )
    out = []
    for side, v in tests:
        for p, c, c2 in zip(*np.nonzero(v > eps)):
            out.append(Violation(Kind.LINEARIZATION, (int(lo[p]), int(hi[p]), int(c), int(c2), side), float(v[p, c, c2])))
    out.sort(key=lambda v: v.indices)
    return out


def check_all(sol: SolutionTriple) -> list[Violation]:
    """Every violated inequality of an integral solution (z taken from its definition)."""
    return (
        check_uniqueness(sol)
        + check_suppression(sol)
        + check_transitivity(sol)
        + check_single_person(sol)
    )


def is_feasible(sol: SolutionTriple) -> bool:
    return not check_all(sol)


# ---------------------------------------------------------------------------
# separation at integral points


def y_components(sol: SolutionTriple):
    """Adjacency lists of the ``y = 1`` graph."""
    n = sol.n
    lo, hi = pair_arrays(n)
    adj = [[] for _ in range(n)]
    for p in np.nonzero(sol.y)[0]:
        adj[lo[p]].append(int(hi[p]))
        adj[hi[p]].append(int(lo[p]))
    return adj


def separate_transitivity(sol: SolutionTriple) -> list[Violation]:
    """Breadth-first search from every candidate over the ``y = 1`` graph.

    A candidate ``v`` at distance two from the root ``u`` lies in the same
    component but is not joined to it; the triangle ``(u, parent(v), v)`` is
    violated. Candidates further away share no neighbour with ``u`` and
    witness no violated triangle.
    """
    n = sol.n
    adj = y_components(sol)
    found = set()
    for u in range(n):
        if not adj[u]:
            continue
        dist = {u: 0}
        parent = {}
        q = deque([u])
        while q:
            a = q.popleft()
            if dist[a] == 2:
                continue
            for b in sorted(adj[a]):
                if b not in dist:
                    dist[b] = dist[a] + 1
                    parent[b] = a
                    q.append(b)
        for v, dv in dist.items():
            if dv == 2 and u < v:
                found.add((u, parent[v], v))
    return [Violation(Kind.TRANSITIVITY, t) for t in sorted(found)]


def separate(sol: SolutionTriple, max_cuts: int = MAX_CUTS) -> list[Violation]:
    """Violated uniqueness, suppression, transitivity and single-person rows.

    Output is ordered by kind then index tuple and capped at ``max_cuts``.
    On integral points every violation has amount 1, so the cap keeps the
    lowest index tuples.
    """
    out = check_uniqueness(sol) + check_suppression(sol) + separate_transitivity(sol)
    out += check_single_person(sol)
    out.sort()
    return out[:max_cuts]
