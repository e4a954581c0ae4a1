import itertools
import os

import numpy as np
import pytest
from hypothesis import settings

from splp.constraints import Kind
from splp.model import Mode, ProblemInstance, SolutionTriple, n_pairs, pair_index

settings.register_profile("splp", deadline=None, max_examples=60, derandomize=True)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "splp"))


def set_partitions(items):
    """Every partition of ``items`` into nonempty blocks (independent of the package)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def enumerate_feasible(n, nc, mode):
    """All feasible integral solutions as ``(labels, blocks)`` by plain enumeration."""
    for lab in itertools.product(range(-1, nc), repeat=n):
        sel = [d for d in range(n) if lab[d] >= 0]
        parts = [[sel]] if mode == Mode.SINGLE and sel else set_partitions(sel)
        for part in parts:
            yield lab, part


def naive_objective(alpha, beta, lab, part):
    n = alpha.shape[0]
    val = sum(alpha[d, lab[d]] for d in range(n) if lab[d] >= 0)
    for block in part:
        for a, b in itertools.combinations(sorted(block), 2):
            val += beta[pair_index(a, b, n), lab[a], lab[b]]
    return float(val)


def naive_optimum(inst: ProblemInstance):
    best = 0.0
    for lab, part in enumerate_feasible(inst.n, inst.n_classes, inst.mode):
        best = min(best, naive_objective(inst.alpha, inst.beta, lab, part))
    return best


def solution_from(lab, part, nc, mode=Mode.MULTI):
    n = len(lab)
    x = np.zeros((n, nc), np.int8)
    for d, c in enumerate(lab):
        if c >= 0:
            x[d, c] = 1
    y = np.zeros(n_pairs(n), np.int8)
    for block in part:
        for a, b in itertools.combinations(sorted(block), 2):
            y[pair_index(a, b, n)] = 1
    return SolutionTriple(x, y, mode)


def sol_of(x, edges=(), n=None, mode=Mode.MULTI):
    x = np.array(x, dtype=np.int8)
    n = x.shape[0]
    y = np.zeros(n_pairs(n), np.int8)
    for a, b in edges:
        y[pair_index(a, b, n)] = 1
    return SolutionTriple(x, y, mode)


def exhaustive(sol):
    """Every violated uniqueness/suppression/transitivity/single-person row, by brute enumeration."""
    n, nc = sol.x.shape
    y = lambda a, b: sol.y[pair_index(a, b, n)]  # noqa: E731
    out = set()
    for d in range(n):
        for c, c2 in itertools.combinations(range(nc), 2):
            if sol.x[d, c] + sol.x[d, c2] > 1:
                out.add((Kind.UNIQUENESS, (d, c, c2)))
    for d, e in itertools.permutations(range(n), 2):
        if y(d, e) > sol.x[d].sum():
            out.add((Kind.SUPPRESSION, (d, e)))
    for a, b, c in itertools.permutations(range(n), 3):
        if a < c and y(a, b) + y(b, c) - 1 > y(a, c):
            out.add((Kind.TRANSITIVITY, (a, b, c)))
    if sol.mode == Mode.SINGLE:
        for d, e in itertools.combinations(range(n), 2):
            for c in range(nc):
                for c2 in range(nc):
                    if sol.x[d, c] + sol.x[e, c2] - 1 > y(d, e):
                        out.add((Kind.SINGLE_PERSON, (d, e, c, c2)))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
