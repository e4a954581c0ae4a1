import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from splp.metrics import (
    MatchConfig, Reference, aop, assign, auc, gt_as_prediction, map_multi, pck, pck_curve, pcp,
    person_count_accuracy, ref_size,
)
from splp.model import GroundTruthScene, GTPose, Person, PoseResult, make_classes

CLASSES = make_classes(["top", "bottom"])
# torso 10, head box diagonal 2*sqrt(2): PCKh radius 0.5 * 0.5 * 2*sqrt(2) = sqrt(2)/2
HEAD = (-1.0, -1.0, 1.0, 1.0)


def pose(x=0.0, visible=(True, True)):
    return GTPose(np.array([[x, 0.0], [x, 10.0]]), np.array(visible), (x - 1, -1.0, x + 1, 1.0), 10.0)


def gt_scene(*poses):
    return GroundTruthScene(tuple(poses), CLASSES, (100.0, 100.0), ((0, 1),))


def pred(*persons):
    return PoseResult(tuple(persons), CLASSES)


def person(parts, score=1.0):
    return Person(tuple(None if p is None else (float(p[0]), float(p[1])) for p in parts), score)


def test_reference_sizes():
    cfg = MatchConfig()
    assert ref_size(pose(), Reference.TORSO, cfg) == 10.0
    assert ref_size(pose(), Reference.HEAD, cfg) == pytest.approx(math.sqrt(2))


def test_pck_exact_prediction():
    g = gt_scene(pose())
    s = pck(gt_as_prediction(g), g)
    assert s.values.tolist() == [1.0, 1.0]
    assert s.mean == 1.0


def test_pck_displaced_and_half():
    g = gt_scene(pose())
    far = pred(person([(50, 0), (50, 10)]))
    assert pck(far, g).mean == 0.0
    half = pred(person([(0, 0), (50, 10)]))
    s = pck(half, g)
    assert s.values.tolist() == [1.0, 0.0]
    assert s.mean == 0.5
    # threshold 0.2 * torso 10 = 2 pixels, inclusive
    assert pck(pred(person([(2, 0), (0, 12.01)])), g).values.tolist() == [1.0, 0.0]


def test_pck_requires_matching_counts():
    g = gt_scene(pose())
    with pytest.raises(ValueError):
        pck(pred(), g)


def test_pckh_uses_head_box():
    g = gt_scene(pose())
    p = pred(person([(0.7, 0), (0.71, 10)]))
    assert pck(p, g, reference="head").values.tolist() == [1.0, 0.0]


def test_occluded_gt_not_counted():
    g = gt_scene(pose(visible=(True, False)))
    s = pck(pred(person([(0, 0), None])), g)
    assert s.counts.tolist() == [1, 0]
    assert s.mean == 1.0


@pytest.mark.parametrize("v, want", [(1.0, 1.0), (0.5, 0.5)])
def test_auc_constant(v, want):
    t = np.linspace(0, 0.2, 21)
    assert auc(t, np.full(21, v)) == pytest.approx(want)


def test_auc_ramp():
    t = np.linspace(0, 0.2, 21)
    assert auc(t, np.linspace(0, 1, 21)) == pytest.approx(0.5)


@given(st.integers(2, 60), st.data())
def test_auc_indicator_closed_form(k, data):
    t = np.linspace(0.0, 0.2, k)
    s = data.draw(st.integers(1, k - 1))
    v = (np.arange(k) >= s).astype(float)
    # one full step per grid interval past the jump, half a step on the jump interval
    h = t[1] - t[0]
    assert auc(t, v) == pytest.approx(((k - 1 - s) * h + 0.5 * h) / 0.2)


def test_auc_validation():
    with pytest.raises(ValueError):
        auc([0.0], [1.0])
    with pytest.raises(ValueError):
        auc([0.1, 0.1], [1.0, 1.0])


def test_pcp_cases():
    g = gt_scene(pose())
    assert pcp(gt_as_prediction(g), g).values.tolist() == [1.0]
    swapped = pred(person([(0, 10), (0, 0)]))
    assert pcp(swapped, g).values.tolist() == [0.0]
    missing = pred(person([(0, 0), None]))
    assert pcp(missing, g).values.tolist() == [0.0]
    # both ends exactly half a stick away still count
    assert pcp(pred(person([(5, 0), (0, 15)])), g).values.tolist() == [1.0]
    assert pcp(pred(person([(0, 0), None])), gt_scene(pose(visible=(True, False)))).counts.tolist() == [0]


def test_map_exact():
    g = gt_scene(pose(0), pose(20))
    s = map_multi(gt_as_prediction(g), g)
    assert s.values.tolist() == [1.0, 1.0]


def test_map_hallucination():
    g = gt_scene(pose(0))
    p = pred(person([(0, 0), (0, 10)], 0.5), person([(60, 0), (60, 10)], 0.9))
    # ranked list per part: FP then TP, so precision 1/2 at full recall
    assert map_multi(p, g).values.tolist() == [0.5, 0.5]
    assert map_multi(pred(person([(0, 0), (0, 10)], 0.9), person([(60, 0), (60, 10)], 0.5)), g).mean == 1.0


def test_only_one_prediction_per_gt():
    g = gt_scene(pose(0))
    partial = person([(0, 0), (0, 30)], 0.9)
    full = person([(0, 0), (0, 10)], 0.5)
    p = pred(partial, full)
    assert assign(p, g) == [-1, 0]
    # top-ranked prediction is unassigned, so both parts see an FP first
    assert map_multi(p, g).values.tolist() == [0.5, 0.5]


def test_assignment_tie_breaks_on_confidence_then_index():
    g = gt_scene(pose(0))
    a, b = person([(0, 0), (0, 10)], 0.4), person([(0, 0), (0, 10)], 0.6)
    assert assign(pred(a, b), g) == [-1, 0]
    c = person([(0, 0), (0, 10)], 0.4)
    assert assign(pred(a, c), g) == [0, -1]


def test_aop_counts():
    g = gt_scene(pose(0))
    assert aop(gt_as_prediction(g), g) == 1.0
    assert aop(pred(person([(0, 0), None])), g) == 0.5
    flipped = gt_scene(pose(0, visible=(True, False)))
    assert aop(pred(person([None, (0, 10)])), flipped) != aop(gt_as_prediction(flipped), flipped)
    # only assigned persons count; this one has no PCKh overlap
    assert math.isnan(aop(pred(person([(50, 50), (50, 50)])), g))


def test_aop_all_flipped():
    g = gt_scene(GTPose(np.array([[0.0, 0.0], [0.0, 10.0]]), np.array([True, False]), HEAD, 10.0))
    # located part 0 hits, so the person is assigned; part 1 located but occluded in GT
    assert aop(pred(person([(0, 0), (0, 10)])), g) == 0.5


def test_person_count():
    g = gt_scene(pose(0), pose(20))
    assert person_count_accuracy(gt_as_prediction(g), g) == 1.0
    one = pred(person([(0, 0), (0, 10)]), person([(20, 0), None]))
    assert person_count_accuracy(one, g) == 1.0
    assert person_count_accuracy(one, g, min_parts=2) == 0.0


@given(st.lists(st.floats(0.0, 10.0), min_size=2, max_size=2), st.lists(st.floats(0.0, 0.5), min_size=3,
                                                                       max_size=3, unique=True))
def test_pck_monotone_in_threshold(offsets, ts):
    g = gt_scene(pose())
    p = pred(person([(offsets[0], 0), (0, 10 + offsets[1])]))
    vals = [pck(p, g, threshold=t).mean for t in sorted(ts)]
    assert vals == sorted(vals)
    ts_, curve = pck_curve(p, g)
    assert np.all(np.diff(curve) >= 0)
    assert 0.0 <= auc(ts_, curve) <= 1.0


scene_persons = st.lists(st.tuples(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6), st.booleans(),
                                   st.integers(0, 3)), min_size=1, max_size=5)


@given(scene_persons, st.randoms(use_true_random=False))
def test_map_order_invariant(specs, rnd):
    g = gt_scene(pose(0), pose(20), pose(40), pose(60))
    persons = []
    for k, (dx, dy, drop, j) in enumerate(specs):
        x = 20.0 * j
        persons.append(person([(x + dx, dy), None if drop else (x, 10 + dy)], score=0.1 + 0.1 * k))
    a = map_multi(pred(*persons), g)
    rnd.shuffle(persons)
    b = map_multi(pred(*persons), g)
    assert np.array_equal(a.values, b.values, equal_nan=True)


@given(scene_persons)
def test_assignment_one_to_one(specs):
    g = gt_scene(pose(0), pose(20), pose(40), pose(60))
    # every prediction overlaps its GT: the top part is always within the PCKh radius
    persons = [person([(20.0 * j + dx / 2, dy / 2), None if drop else (20.0 * j, 10.0)], 0.5)
               for dx, dy, drop, j in specs]
    m = assign(pred(*persons), g)
    hit = [j for j in m if j >= 0]
    assert len(hit) == len(set(hit))
    targets = {j for _, _, _, j in specs}
    assert len(hit) == min(len(persons), len(targets))
