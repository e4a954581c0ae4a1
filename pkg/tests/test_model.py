import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from splp.constraints import check_linearization
from splp.model import (
    DetectionSet, Detection, GroundTruthScene, Mode, Person, PoseResult, ProblemInstance, SolutionTriple, derive_z, dumps,
    loads, make_classes, n_pairs, pair_arrays, pair_index, random_instance,
)
from splp.detections import NoiseConfig, generate_scene, make_rng, make_scene


def _sol(x, y, mode=Mode.MULTI):
    return SolutionTriple(np.array(x), np.array(y), mode)


def test_derive_z_examples():
    s = _sol([[1], [1]], [1])
    assert derive_z(s, 0, 1, 0, 0) == 1
    assert derive_z(_sol([[1], [1]], [0]), 0, 1, 0, 0) == 0
    assert derive_z(_sol([[1, 0], [1, 0]], [1]), 0, 1, 0, 1) == 0


def test_derive_z_out_of_range():
    s = _sol([[1], [1]], [1])
    with pytest.raises(IndexError):
        derive_z(s, 0, 2, 0, 0)
    with pytest.raises(IndexError):
        derive_z(s, 0, 1, 0, 1)


@pytest.mark.parametrize("xa,xb,y", list(itertools.product([0, 1], repeat=3)))
def test_derive_z_satisfies_linearization(xa, xb, y):
    s = _sol([[xa], [xb]], [y])
    z = derive_z(s, 0, 1, 0, 0)
    assert z == xa * xb * y
    assert check_linearization(s.x, s.y, np.array([[[z]]])) == []
    # the other value of z violates at least one of the four rows
    assert check_linearization(s.x, s.y, np.array([[[1 - z]]])) != []


def test_pair_index_matches_storage_order():
    for n in range(1, 8):
        lo, hi = pair_arrays(n)
        assert len(lo) == n_pairs(n)
        for p, (a, b) in enumerate(zip(lo, hi)):
            assert pair_index(a, b, n) == p
            assert pair_index(b, a, n) == p


def test_pair_index_rejects_diagonal():
    with pytest.raises(IndexError):
        pair_index(2, 2, 4)


def test_unary_clamped_on_ingest():
    d = Detection(0, 1.0, 2.0, 3.0, (0, 0, 1, 1), (0.0, 1.0))
    assert 0 < d.unary[0] < d.unary[1] < 1


def test_detection_validation():
    with pytest.raises(ValueError):
        Detection(0, 0, 0, 0.0, (0, 0, 1, 1), (0.5,))
    with pytest.raises(ValueError):
        Detection(0, 0, 0, 1.0, (2, 0, 1, 1), (0.5,))


def test_detection_set_checks_ids_and_classes():
    cls = make_classes(["a", "b"])
    d0 = Detection(0, 0, 0, 1, (0, 0, 1, 1), (0.5, 0.5))
    with pytest.raises(ValueError):
        DetectionSet((Detection(1, 0, 0, 1, (0, 0, 1, 1), (0.5, 0.5)),), cls)
    with pytest.raises(ValueError):
        DetectionSet((d0, Detection(1, 0, 0, 1, (0, 0, 1, 1), (0.5,))), cls)


def test_solution_rejects_non_binary():
    with pytest.raises(ValueError):
        _sol([[2]], [])
    with pytest.raises(ValueError):
        _sol([[1], [0]], [1, 1])


def test_instance_shape_checks():
    with pytest.raises(ValueError):
        ProblemInstance(np.zeros((3, 2)), np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        ProblemInstance(np.array([[np.inf]]), np.zeros((0, 1, 1)))


def test_beta_of_canonical_order():
    inst = random_instance(np.random.default_rng(0), 3, 2)
    assert inst.beta_of(2, 0, 1, 0) == inst.beta[pair_index(0, 2, 3), 0, 1]


@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_detection_set_round_trip(seed, persons):
    rng = make_rng(seed)
    dets = generate_scene(make_scene(rng, persons), NoiseConfig(), rng)
    back = loads(dumps(dets))
    assert back == dets
    assert dumps(back) == dumps(dets)


@given(st.integers(0, 2**32 - 1))
def test_ground_truth_round_trip(seed):
    gt = make_scene(make_rng(seed), 3)
    back = loads(dumps(gt))
    assert isinstance(back, GroundTruthScene)
    assert back == gt


def test_instance_and_poses_round_trip():
    inst = random_instance(np.random.default_rng(1), 4, 3, Mode.SINGLE)
    back = loads(dumps(inst))
    assert np.array_equal(back.alpha, inst.alpha) and np.array_equal(back.beta, inst.beta)
    assert back.mode == Mode.SINGLE
    pr = PoseResult((Person(((1.0, 2.0), None), 0.7, (0, 3)),), make_classes(["a", "b"]))
    assert loads(dumps(pr)) == pr


def test_loads_rejects_wrong_schema():
    with pytest.raises(ValueError):
        loads('{"schema_version": 99, "kind": "detections"}')
    with pytest.raises(ValueError):
        loads('{"schema_version": 1, "kind": "nope"}')
