"""Synthetic stand-in for a part detector.

Scenes and candidates are drawn from ``numpy.random.Generator(PCG64(seed))``,
so a seed reproduces the same floats on every platform numpy supports.
"""
from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

import numpy as np

from .model import (
    LSP14,
    LSP14_STICKS,
    LSP14_TEMPLATE,
    Detection,
    DetectionSet,
    GroundTruthScene,
    GTPose,
    make_classes,
)

DEFAULT_SUBSET = 100

# part scale and head box size as fractions of person height
PART_SCALE = 0.12
HEAD_BOX = 0.14


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


class Normalization(str, enum.Enum):
    SOFTMAX = "softmax"
    SIGMOID = "sigmoid"


@dataclass(frozen=True)
class NoiseConfig:
    """Detector noise model.

    Location noise has standard deviation ``loc_sigma + loc_sigma_h * h``
    (pixels), where ``h`` is the part scale. Each visible part is missed with
    probability ``miss_rate``; otherwise it yields ``1 + Poisson(dup_mean - 1)``
    candidates. ``clutter_rate`` is the Poisson mean of background candidates.
    """

    loc_sigma: float = 0.0
    loc_sigma_h: float = 0.1
    scale_sigma: float = 0.1
    unary_concentration: float = 4.0
    score_noise: float = 0.3
    clutter_rate: float = 5.0
    miss_rate: float = 0.1
    dup_mean: float = 2.0
    normalization: Normalization = Normalization.SOFTMAX
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.miss_rate <= 1.0:
            raise ValueError("miss_rate must lie in [0, 1]")
        if self.dup_mean < 1.0:
            raise ValueError("dup_mean must be at least 1")
        for name in ("loc_sigma", "loc_sigma_h", "scale_sigma", "score_noise", "clutter_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not self.unary_concentration > 0:
            raise ValueError("unary_concentration must be positive")
        object.__setattr__(self, "normalization", Normalization(self.normalization))

    def to_dict(self):
        d = asdict(self)
        d["normalization"] = self.normalization.value
        return d


# ---------------------------------------------------------------------------
# ground truth


def make_person(rng, feet_x, feet_y, height, jitter=0.02, visible_p=0.9) -> GTPose:
    joints = LSP14_TEMPLATE * height + np.array([feet_x, feet_y])
    joints = joints + rng.normal(0.0, jitter * height, size=joints.shape)
    visible = rng.random(len(LSP14)) < visible_p
    if not visible.any():
        visible[rng.integers(len(LSP14))] = True
    hx, hy = joints[LSP14.index("head")]
    r = 0.5 * HEAD_BOX * height
    # torso diagonal: right shoulder to left hip
    torso = float(np.linalg.norm(joints[LSP14.index("shoulder_r")] - joints[LSP14.index("hip_l")]))
    return GTPose(joints, visible, (hx - r, hy - r, hx + r, hy + r), torso)


def make_scene(rng, n_persons, image_size=(1000.0, 400.0), height=(150.0, 250.0), gap=0.5) -> GroundTruthScene:
    """Upright persons placed side by side with horizontal spacing of at least ``gap`` heights."""
    w, hgt = image_size
    hs = rng.uniform(height[0], height[1], size=n_persons)
    widths = 0.5 * hs
    need = widths.sum() + gap * hs.mean() * max(n_persons - 1, 0) if n_persons else 0.0
    if need > w:
        raise ValueError("persons do not fit into the image")
    slack = w - need
    cuts = np.sort(rng.uniform(0.0, slack, size=n_persons + 1))
    shares = np.diff(cuts) if n_persons else np.zeros(0)
    persons = []
    x = cuts[0] if n_persons else 0.0
    for i in range(n_persons):
        cx = x + 0.5 * widths[i]
        feet_y = rng.uniform(hs[i], hgt) if hgt > hs[i] else hgt
        persons.append(make_person(rng, cx, feet_y, hs[i]))
        x += widths[i] + gap * hs.mean() + shares[i]
    return GroundTruthScene(tuple(persons), make_classes(LSP14), (float(w), float(hgt)), LSP14_STICKS)


# ---------------------------------------------------------------------------
# candidates


def _normalize(scores, kind, kappa):
    if kind == Normalization.SOFTMAX:
        # an extra background entry with score 0 absorbs mass for clutter
        z = kappa * np.append(scores, 0.0)
        z -= z.max()
        e = np.exp(z)
        return (e / e.sum())[:-1]
    return 1.0 / (1.0 + np.exp(-kappa * (scores - 0.5)))


def generate_scene(gt: GroundTruthScene, cfg: NoiseConfig, rng=None) -> DetectionSet:
    """Noisy candidates for every visible ground-truth part plus clutter.

    Candidates are emitted in a random order; ``origin`` records the
    generating ``(person, class)`` or None for clutter.
    """
    rng = make_rng(cfg.rng_seed) if rng is None else rng
    nc = len(gt.classes)
    w, hgt = gt.image_size
    raw = []
    for pi, person in enumerate(gt.persons):
        height = abs(person.joints[:, 1].max() - person.joints[:, 1].min()) or 1.0
        h0 = PART_SCALE * height
        for c in range(nc):
            if not person.visible[c]:
                continue
            if rng.random() < cfg.miss_rate:
                continue
            k = 1 + int(rng.poisson(cfg.dup_mean - 1.0))
            for _ in range(k):
                h = h0 * float(np.exp(rng.normal(0.0, cfg.scale_sigma))) if cfg.scale_sigma else h0
                sd = cfg.loc_sigma + cfg.loc_sigma_h * h
                off = rng.normal(0.0, sd, size=2) if sd > 0 else np.zeros(2)
                x, y = person.joints[c] + off
                # candidates far from their part look less like it
                sim = float(np.exp(-0.5 * (np.hypot(*off) / h) ** 2))
                scores = rng.normal(0.0, cfg.score_noise, size=nc) if cfg.score_noise else np.zeros(nc)
                scores[c] += sim
                raw.append((x, y, h, _normalize(scores, cfg.normalization, cfg.unary_concentration), (pi, c)))
    n_clutter = int(rng.poisson(cfg.clutter_rate)) if cfg.clutter_rate > 0 else 0
    for _ in range(n_clutter):
        x, y = rng.uniform(0.0, w), rng.uniform(0.0, hgt)
        h = rng.uniform(15.0, 30.0)
        scores = rng.normal(0.0, cfg.score_noise, size=nc) if cfg.score_noise else np.zeros(nc)
        raw.append((x, y, h, _normalize(scores, cfg.normalization, cfg.unary_concentration), None))
    order = rng.permutation(len(raw)) if raw else []
    dets = []
    for new_id, i in enumerate(order):
        x, y, h, u, origin = raw[i]
        box = (x - 0.5 * h, y - 0.5 * h, x + 0.5 * h, y + 0.5 * h)
        dets.append(Detection(new_id, float(x), float(y), float(h), box, tuple(u), origin))
    return DetectionSet(tuple(dets), gt.classes, gt.image_size)


def select_subset(dets: DetectionSet, k: int = DEFAULT_SUBSET) -> DetectionSet:
    """Keep ``k`` representative candidates.

    Candidates are ranked within their most likely class by that
    probability. Classes take turns until each holds ``k // |C|``
    candidates (or runs out); remaining slots go to the best leftovers
    overall. Kept candidates retain their relative order.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    n = len(dets)
    if n <= k:
        return dets.subset(range(n))
    u = dets.unary
    cls = np.argmax(u, axis=1)
    score = u[np.arange(n), cls]
    ranked = {c: sorted(np.nonzero(cls == c)[0].tolist(), key=lambda i: (-score[i], i)) for c in range(dets.n_classes)}
    quota = k // dets.n_classes
    keep = set()
    for r in range(quota):
        for c in range(dets.n_classes):
            if r < len(ranked[c]):
                keep.add(ranked[c][r])
    rest = sorted((i for i in range(n) if i not in keep), key=lambda i: (-score[i], i))
    keep.update(rest[: k - len(keep)])
    return dets.subset(sorted(keep))
