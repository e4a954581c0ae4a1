import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from splp.constraints import (
    MAX_CUTS, Kind, Side, Violation, check_all, check_linearization, check_single_person, check_suppression,
    check_transitivity, check_uniqueness, is_feasible, row_activity, separate,
)
from splp.model import Mode, SolutionTriple, n_pairs, pair_index

from conftest import exhaustive, sol_of


def test_uniqueness_examples():
    assert check_uniqueness(sol_of([[1, 0, 0]])) == []
    assert check_uniqueness(sol_of([[1, 1, 0]])) == [Violation(Kind.UNIQUENESS, (0, 0, 1))]
    assert check_uniqueness(sol_of([[0, 0, 0]])) == []


def test_suppression_examples():
    assert check_suppression(sol_of([[0], [1]], [(0, 1)])) == [Violation(Kind.SUPPRESSION, (0, 1))]
    assert check_suppression(sol_of([[1], [1]], [(0, 1)])) == []
    for x in itertools.product([0, 1], repeat=2):
        assert check_suppression(sol_of([[x[0]], [x[1]]])) == []


def test_transitivity_examples():
    assert check_transitivity(sol_of([[1]] * 3, [(0, 1), (1, 2)])) == [Violation(Kind.TRANSITIVITY, (0, 1, 2))]
    assert check_transitivity(sol_of([[1]] * 3, [(0, 1)])) == []
    assert check_transitivity(sol_of([[1]] * 3, [(0, 1), (1, 2), (0, 2)])) == []


def test_single_person_examples():
    m = Mode.SINGLE
    assert len(check_single_person(sol_of([[1], [1]], mode=m))) == 1
    assert check_single_person(sol_of([[1], [1]], [(0, 1)], mode=m)) == []
    assert check_single_person(sol_of([[1], [0]], mode=m)) == []
    # not applied in multi-person mode
    assert check_single_person(sol_of([[1], [1]])) == []


def test_linearization_examples():
    one = np.ones((2, 1))
    v = check_linearization(one, [1.0], [[[0.0]]])
    assert [w.indices[-1] for w in v] == [Side.LOWER]
    v = check_linearization([[0.0], [1.0]], [1.0], [[[0.3]]])
    assert Side.X_FIRST in [w.indices[-1] for w in v]
    assert check_linearization(one, [1.0], [[[1.0]]]) == []


def test_separate_examples():
    assert separate(sol_of([[1]] * 3, [(0, 1), (1, 2)])) == [Violation(Kind.TRANSITIVITY, (0, 1, 2))]
    assert separate(sol_of([[1], [1], [0]], [(0, 1)])) == []


def test_separate_chain_of_four():
    sol = sol_of([[1]] * 4, [(0, 1), (1, 2), (2, 3)])
    found = {(v.kind, v.indices) for v in separate(sol)}
    # brute force over all four triples: only the distance-two pairs have a violated triangle
    assert found == exhaustive(sol) == {(Kind.TRANSITIVITY, (0, 1, 2)), (Kind.TRANSITIVITY, (1, 2, 3))}
    # the end-to-end pair (0, 3) is repaired once the two triangles are enforced


def _random_point(rng, n, nc, mode):
    x = (rng.random((n, nc)) < rng.uniform(0.1, 0.6)).astype(np.int8)
    y = (rng.random(n_pairs(n)) < rng.uniform(0.1, 0.9)).astype(np.int8)
    return SolutionTriple(x, y, mode)


@given(st.integers(0, 2**32 - 1), st.integers(1, 10), st.integers(1, 3), st.sampled_from(list(Mode)))
def test_separate_empty_iff_exhaustive_empty(seed, n, nc, mode):
    sol = _random_point(np.random.default_rng(seed), n, nc, mode)
    cuts = separate(sol)
    ex = exhaustive(sol)
    assert (not cuts) == (not ex)
    assert {(v.kind, v.indices) for v in cuts} <= ex
    assert is_feasible(sol) == (not ex)


@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(1, 3), st.sampled_from(list(Mode)))
def test_cuts_are_violated_by_one(seed, n, nc, mode):
    sol = _random_point(np.random.default_rng(seed), n, nc, mode)
    for v in separate(sol) + check_all(sol):
        row, rhs = v.row(n, nc)
        assert row_activity(row, rhs, sol) >= 1


@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(1, 3), st.sampled_from(list(Mode)))
def test_check_all_matches_exhaustive(seed, n, nc, mode):
    sol = _random_point(np.random.default_rng(seed), n, nc, mode)
    assert {(v.kind, v.indices) for v in check_all(sol)} == exhaustive(sol)


def test_separate_sorted_and_capped():
    sol = sol_of(np.ones((12, 2)), [])
    cuts = separate(sol, max_cuts=5)
    assert len(cuts) == 5 and cuts == sorted(cuts)
    assert len(separate(sol)) == 12 <= MAX_CUTS


@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.integers(1, 3))
def test_linearization_matches_rows(seed, n, nc):
    rng = np.random.default_rng(seed)
    x = rng.random((n, nc))
    y = rng.random(n_pairs(n))
    z = rng.random((n_pairs(n), nc, nc))
    got = {v.indices for v in check_linearization(x, y, z)}
    want = set()
    for d, e in itertools.combinations(range(n), 2):
        p = pair_index(d, e, n)
        for c in range(nc):
            for c2 in range(nc):
                zz = z[p, c, c2]
                for side, viol in (
                    (Side.LOWER, x[d, c] + x[e, c2] + y[p] - 2 > zz + 1e-9),
                    (Side.X_FIRST, zz > x[d, c] + 1e-9),
                    (Side.X_SECOND, zz > x[e, c2] + 1e-9),
                    (Side.Y, zz > y[p] + 1e-9),
                ):
                    if viol:
                        want.add((d, e, c, c2, side))
    assert got == want


def test_violation_rows_reject_nothing_feasible():
    sol = sol_of([[1, 0], [0, 1], [1, 0]], [(0, 1), (1, 2), (0, 2)])
    assert is_feasible(sol)
    assert separate(sol) == []


@pytest.mark.parametrize("k", list(Kind))
def test_row_keys_are_well_formed(k):
    idx = {
        Kind.UNIQUENESS: (0, 0, 1), Kind.SUPPRESSION: (0, 1), Kind.TRANSITIVITY: (0, 1, 2),
        Kind.LINEARIZATION: (0, 2, 1, 0, Side.LOWER), Kind.SINGLE_PERSON: (0, 1, 1, 1),
    }[k]
    row, rhs = Violation(k, idx).row(3, 2)
    assert all(key[0] in "xyz" for key in row)
    assert np.isfinite(rhs)
