import hashlib

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from splp.detections import (
    DEFAULT_SUBSET, NoiseConfig, Normalization, generate_scene, make_rng, make_scene, select_subset,
)
from splp.model import Detection, DetectionSet, dumps, make_classes


def scene(seed=7, persons=3, **noise):
    rng = make_rng(seed)
    gt = make_scene(rng, persons)
    return gt, generate_scene(gt, NoiseConfig(rng_seed=seed, **noise))


def test_same_seed_same_output():
    _, a = scene()
    _, b = scene()
    assert dumps(a) == dumps(b)
    _, c = scene(seed=8)
    assert dumps(a) != dumps(c)


def test_frozen_fixture():
    # regression anchor for the PCG64 stream; a change here breaks stored fixtures
    _, d = scene()
    assert len(d) == 73
    assert d.detections[0].x == 687.9718401070425
    assert d.detections[0].y == 122.15221888931752
    assert d.detections[0].origin == (2, 10)
    assert hashlib.sha256(dumps(d).encode()).hexdigest() == (
        "d0c266379febcbecf86a70b1b4dc82a671fd66c968a478e93d5304608aa95676")


def test_all_missed_no_clutter_is_empty():
    _, d = scene(miss_rate=1.0, clutter_rate=0.0)
    assert len(d) == 0


def test_noiseless_limit():
    gt, d = scene(loc_sigma=0.0, loc_sigma_h=0.0, scale_sigma=0.0, score_noise=0.0,
                  clutter_rate=0.0, miss_rate=0.0, dup_mean=1.0, unary_concentration=200.0)
    visible = sum(int(p.visible.sum()) for p in gt.persons)
    assert len(d) == visible
    for det in d.detections:
        p, c = det.origin
        assert (det.x, det.y) == tuple(gt.persons[p].joints[c])
        assert int(np.argmax(det.unary)) == c
        assert det.unary[c] == pytest.approx(1.0 - 1e-6)   # clamped into (0, 1)


def test_origins_cover_visible_parts_only():
    gt, d = scene(miss_rate=0.0)
    seen = {det.origin for det in d.detections if det.origin is not None}
    want = {(p, c) for p, person in enumerate(gt.persons) for c in np.nonzero(person.visible)[0]}
    assert seen == want


def test_sigmoid_normalization_runs():
    _, d = scene(normalization="sigmoid")
    assert len(d) > 0
    assert np.all((d.unary > 0) & (d.unary < 1))
    assert NoiseConfig(normalization="sigmoid").normalization is Normalization.SIGMOID


@pytest.mark.parametrize("kw", [dict(miss_rate=1.5), dict(dup_mean=0.5), dict(loc_sigma=-1.0),
                                dict(unary_concentration=0.0)])
def test_noise_config_validation(kw):
    with pytest.raises(ValueError):
        NoiseConfig(**kw)


def _set(unaries, nc):
    dets = [Detection(i, float(i), 0.0, 1.0, (i - 0.5, -0.5, i + 0.5, 0.5), u) for i, u in enumerate(unaries)]
    return DetectionSet(tuple(dets), make_classes([f"c{k}" for k in range(nc)]))


def test_default_subset_size():
    assert DEFAULT_SUBSET == 100
    _, d = scene(seed=3, persons=5, clutter_rate=40.0, dup_mean=3.0)
    assert len(d) > 100
    assert len(select_subset(d)) == 100


def test_round_robin_keeps_every_class():
    d = _set([(0.9, 0.1), (0.95, 0.1), (0.8, 0.1), (0.2, 0.6)], 2)
    out = select_subset(d, 2)
    assert [det.x for det in out.detections] == [1.0, 3.0]


def test_small_set_is_identity():
    d = _set([(0.9, 0.1), (0.3, 0.7)], 2)
    out = select_subset(d, 5)
    assert dumps(out) == dumps(d)
    with pytest.raises(ValueError):
        select_subset(d, 0)


@given(st.lists(st.tuples(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(0.01, 0.99)),
                min_size=0, max_size=25),
       st.integers(1, 30))
def test_subset_properties(unaries, k):
    d = _set(unaries, 3)
    out = select_subset(d, k)
    assert len(out) == min(k, len(d))
    assert [det.id for det in out.detections] == list(range(len(out)))
    kept = {det.x for det in out.detections}
    u = d.unary
    cls = np.argmax(u, axis=1) if len(d) else np.zeros(0, int)
    score = u[np.arange(len(d)), cls] if len(d) else np.zeros(0)
    for c in range(3):
        members = np.nonzero(cls == c)[0]
        ins = [score[i] for i in members if float(i) in kept]
        outs = [score[i] for i in members if float(i) not in kept]
        if ins and outs:
            assert min(ins) >= max(outs)
        # guaranteed share per class
        assert len(ins) >= min(k // 3, len(members))
    # kept candidates keep their relative order
    xs = [det.x for det in out.detections]
    assert xs == sorted(xs)
