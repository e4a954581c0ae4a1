"""Pairwise probabilities from geometry: features, histogram posterior and
per-class-pair logistic models.

Same-class pairs use 19 geometric features (offsets, scale difference and box
overlaps, their squares and negative exponentials, plus a bias). Cross-class
pairs use the posterior of a 2D histogram over normalized distance and angle,
optionally the unary vectors of both candidates, plus a bias. Costs are read
directly as ``-<f, theta>``.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .model import SCHEMA_VERSION, DetectionSet, _check_doc, n_pairs, pair_arrays

log = logging.getLogger(__name__)

SAME_CLASS_DIM = 19


class Appearance(str, enum.Enum):
    NONE = "none"
    SCALAR = "scalar"   # p of each candidate for its own class
    FULL = "full"       # whole unary vector of each candidate


def cross_class_dim(n_classes: int, appearance=Appearance.FULL) -> int:
    appearance = Appearance(appearance)
    if appearance == Appearance.FULL:
        return 2 * n_classes + 2
    if appearance == Appearance.SCALAR:
        return 4
    return 2


# ---------------------------------------------------------------------------
# same-class features


def _overlaps(ba, bb):
    """Intersection over union / min / max area, row-wise; zero-area boxes give 0."""
    iw = np.clip(np.minimum(ba[:, 2], bb[:, 2]) - np.maximum(ba[:, 0], bb[:, 0]), 0.0, None)
    ih = np.clip(np.minimum(ba[:, 3], bb[:, 3]) - np.maximum(ba[:, 1], bb[:, 1]), 0.0, None)
    inter = iw * ih
    aa = (ba[:, 2] - ba[:, 0]) * (ba[:, 3] - ba[:, 1])
    ab = (bb[:, 2] - bb[:, 0]) * (bb[:, 3] - bb[:, 1])
    out = np.zeros((ba.shape[0], 3))
    ok = (aa > 0) & (ab > 0)
    union = aa + ab - inter
    out[ok, 0] = inter[ok] / union[ok]
    out[ok, 1] = inter[ok] / np.minimum(aa, ab)[ok]
    out[ok, 2] = inter[ok] / np.maximum(aa, ab)[ok]
    return out


def same_class_matrix(xy_a, h_a, box_a, xy_b, h_b, box_b) -> np.ndarray:
    """Row-wise same-class features for aligned arrays of candidate attributes."""
    hbar = 0.5 * (h_a + h_b)
    base = np.empty((xy_a.shape[0], 6))
    base[:, 0] = np.abs(xy_a[:, 0] - xy_b[:, 0]) / hbar
    base[:, 1] = np.abs(xy_a[:, 1] - xy_b[:, 1]) / hbar
    base[:, 2] = np.abs(h_a - h_b) / hbar
    base[:, 3:] = _overlaps(box_a, box_b)
    return np.hstack([base, base**2, np.exp(-base), np.ones((base.shape[0], 1))])


def same_class_features(d, d2) -> np.ndarray:
    """Features of two candidates hypothesized to be the same part."""
    return same_class_matrix(
        np.array([[d.x, d.y]]), np.array([d.h]), np.array([d.box]),
        np.array([[d2.x, d2.y]]), np.array([d2.h]), np.array([d2.box]),
    )[0]


# ---------------------------------------------------------------------------
# distance / angle histograms


def distance_angle(xy_a, h_a, xy_b, h_b):
    """Distance normalized by mean scale, and angle of ``b - a`` in [-pi, pi)."""
    dv = np.asarray(xy_b, float) - np.asarray(xy_a, float)
    s = np.hypot(dv[..., 0], dv[..., 1]) / (0.5 * (np.asarray(h_a) + np.asarray(h_b)))
    r = np.arctan2(dv[..., 1], dv[..., 0])
    r = np.where(r >= math.pi, -math.pi, r)
    return s, r


@dataclass
class HistogramPosterior:
    """Smoothed, normalized 2D histograms over (distance, angle) per ordered class pair.

    ``pos[c, c']`` / ``neg[c, c']`` are the tables for the lower-id candidate
    taking ``c`` and the higher-id one taking ``c'``; diagonal tables are
    unused and kept uniform.
    """

    pos: np.ndarray          # (|C|, |C|, bins_s, bins_r)
    neg: np.ndarray
    s_max: float = 12.0
    smoothing: float = 1.0

    @property
    def bins_s(self):
        return self.pos.shape[2]

    @property
    def bins_r(self):
        return self.pos.shape[3]

    @property
    def n_classes(self):
        return self.pos.shape[0]

    def bin_of(self, s, r):
        bs = np.floor(np.asarray(s, float) / self.s_max * self.bins_s).astype(np.int64)
        br = np.floor((np.asarray(r, float) + math.pi) / (2 * math.pi) * self.bins_r).astype(np.int64)
        return np.clip(bs, 0, self.bins_s - 1), np.clip(br, 0, self.bins_r - 1)

    def posterior(self, c, c2, s, r):
        """``p(same person | s, r)`` with equal priors."""
        if c == c2:
            raise ValueError("histogram posterior is only defined for c != c'")
        bs, br = self.bin_of(s, r)
        p = self.pos[c, c2, bs, br]
        q = self.neg[c, c2, bs, br]
        return p / (p + q)

    def to_dict(self):
        return {
            "s_max": self.s_max,
            "smoothing": self.smoothing,
            "pos": self.pos.tolist(),
            "neg": self.neg.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["pos"], float), np.array(d["neg"], float), float(d["s_max"]), float(d["smoothing"]))


def fit_histograms(cls_a, cls_b, s, r, labels, n_classes, bins_s=16, bins_r=16, s_max=12.0, smoothing=1.0):
    """Histograms from labeled cross-class samples.

    Sample ``i`` is a pair whose lower-id candidate has class ``cls_a[i]`` and
    higher-id candidate ``cls_b[i]``. Every ordered pair ``c != c'`` needs at
    least one positive and one negative sample.
    """
    cls_a = np.asarray(cls_a, np.int64)
    cls_b = np.asarray(cls_b, np.int64)
    labels = np.asarray(labels, bool)
    shape = (n_classes, n_classes, bins_s, bins_r)
    hist = HistogramPosterior(np.zeros(shape), np.zeros(shape), float(s_max), float(smoothing))
    bs, br = hist.bin_of(s, r)
    cnt_pos = np.zeros(shape)
    cnt_neg = np.zeros(shape)
    np.add.at(cnt_pos, (cls_a[labels], cls_b[labels], bs[labels], br[labels]), 1.0)
    np.add.at(cnt_neg, (cls_a[~labels], cls_b[~labels], bs[~labels], br[~labels]), 1.0)
    for c in range(n_classes):
        for c2 in range(n_classes):
            if c == c2:
                continue
            if cnt_pos[c, c2].sum() == 0 or cnt_neg[c, c2].sum() == 0:
                raise ValueError(f"class pair ({c}, {c2}) needs positive and negative samples")
    diag = np.eye(n_classes, dtype=bool)
    cnt_pos[diag] = 1.0     # unused tables stay uniform
    cnt_neg[diag] = 1.0
    cnt_pos += smoothing
    cnt_neg += smoothing
    hist.pos = cnt_pos / cnt_pos.sum(axis=(2, 3), keepdims=True)
    hist.neg = cnt_neg / cnt_neg.sum(axis=(2, 3), keepdims=True)
    return hist


def cross_class_features(d, d2, c, c2, hist: HistogramPosterior, appearance=Appearance.FULL) -> np.ndarray:
    """Features of ``d`` taking class ``c`` and ``d2`` taking ``c2`` (``c != c2``).

    Distance and angle are measured from the lower-id candidate to the
    higher-id one. Appearance terms list the candidate carrying the smaller
    class id first, so that a single parameter vector serves both
    orientations of the class pair.
    """
    if c == c2:
        raise ValueError("cross-class features need c != c'")
    if d.id > d2.id:
        d, d2, c, c2 = d2, d, c2, c
    s, r = distance_angle([d.x, d.y], d.h, [d2.x, d2.y], d2.h)
    post = float(hist.posterior(c, c2, s, r))
    first, second = (d, d2) if c < c2 else (d2, d)
    ca, cb = min(c, c2), max(c, c2)
    appearance = Appearance(appearance)
    if appearance == Appearance.FULL:
        app = list(first.unary) + list(second.unary)
    elif appearance == Appearance.SCALAR:
        app = [first.unary[ca], second.unary[cb]]
    else:
        app = []
    return np.array([post, *app, 1.0])


# ---------------------------------------------------------------------------
# logistic regression with a Gaussian prior


def objective(theta, F, y, sigma, weights=None):
    """Regularized log-likelihood ``sum w log p(y | f, theta) - |theta|^2 / (2 sigma^2)``."""
    t = F @ theta
    ll = -np.where(y, np.logaddexp(0.0, -t), np.logaddexp(0.0, t))
    ll = ll.sum() if weights is None else ll @ weights
    return ll - theta @ theta / (2.0 * sigma**2)


def gradient(theta, F, y, sigma, weights=None):
    r = y - _sig(F @ theta)
    if weights is not None:
        r = r * weights
    return F.T @ r - theta / sigma**2


def _sig(t):
    return np.exp(-np.logaddexp(0.0, -t))


@dataclass
class FitResult:
    theta: np.ndarray
    objective: float
    grad_norm: float
    iterations: int
    history: list = field(default_factory=list)


def train_logistic(F, y, sigma=1.0, tol=1e-8, max_iter=100, weights=None) -> FitResult:
    """Maximize :func:`objective` by damped Newton steps.

    Each step backtracks until the objective does not decrease, so the
    recorded history is nondecreasing. Stops when the gradient norm falls
    to ``tol`` or no further progress is representable.
    """
    F = np.asarray(F, dtype=float)
    y = np.asarray(y, dtype=float)
    if F.ndim != 2 or F.shape[0] != y.shape[0]:
        raise ValueError("feature matrix and labels disagree in length")
    if not np.all(np.isfinite(F)):
        raise ValueError("features must be finite")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if not (np.any(y == 1) and np.any(y == 0)):
        raise ValueError("need at least one sample of each label")
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != y.shape or np.any(weights < 0):
            raise ValueError("weights must be nonnegative, one per sample")
    k = F.shape[1]
    theta = np.zeros(k)
    obj = objective(theta, F, y, sigma, weights)
    hist = [obj]
    g = gradient(theta, F, y, sigma, weights)
    it = 0
    while it < max_iter and np.linalg.norm(g) > tol:
        it += 1
        p = _sig(F @ theta)
        w = p * (1.0 - p)
        if weights is not None:
            w = w * weights
        H = (F * w[:, None]).T @ F + np.eye(k) / sigma**2
        step = np.linalg.solve(H, g)
        lam = 1.0
        while True:
            cand = theta + lam * step
            cobj = objective(cand, F, y, sigma, weights)
            if cobj >= obj or lam < 1e-10:
                break
            lam *= 0.5
        if cobj < obj:
            break
        moved = not np.array_equal(cand, theta)
        theta, obj = cand, cobj
        hist.append(obj)
        g = gradient(theta, F, y, sigma, weights)
        if not moved:
            break
    gn = float(np.linalg.norm(g))
    if gn > tol:
        log.debug("logistic fit stopped at gradient norm %.3g after %d steps", gn, it)
    return FitResult(theta, float(obj), gn, it, hist)


def predict_cost(f, theta) -> float:
    """``-<f, theta>``: the log-odds cost of the logistic model, without the sigmoid."""
    f = np.asarray(f, float)
    theta = np.asarray(theta, float)
    if f.shape != theta.shape:
        raise ValueError(f"feature length {f.shape} != parameter length {theta.shape}")
    return -float(f @ theta)


# ---------------------------------------------------------------------------
# trained model


def class_pairs(n_classes):
    """Canonical class pairs ``(c, c')`` with ``c <= c'``."""
    return [(c, c2) for c in range(n_classes) for c2 in range(c, n_classes)]


@dataclass
class PairwiseModel:
    theta: dict            # (c, c') with c <= c' -> parameter vector
    hist: HistogramPosterior
    sigma: float = 1.0
    appearance: Appearance = Appearance.FULL

    def __post_init__(self):
        self.appearance = Appearance(self.appearance)
        nc = self.hist.n_classes
        want = set(class_pairs(nc))
        if set(self.theta) != want:
            missing = sorted(want - set(self.theta))
            raise ValueError(f"parameters missing for class pairs {missing}")
        for (c, c2), th in self.theta.items():
            dim = SAME_CLASS_DIM if c == c2 else cross_class_dim(nc, self.appearance)
            if np.asarray(th).shape != (dim,):
                raise ValueError(f"class pair ({c}, {c2}): expected {dim} parameters")

    @property
    def n_classes(self):
        return self.hist.n_classes

    def predict_costs(self, dets: DetectionSet) -> np.ndarray:
        """``beta`` of shape (pairs, |C|, |C|) for every candidate pair."""
        nc = self.n_classes
        if dets.n_classes != nc:
            raise ValueError(f"model has {nc} classes, detections have {dets.n_classes}")
        n = len(dets)
        beta = np.zeros((n_pairs(n), nc, nc))
        if n < 2:
            return beta
        lo, hi = pair_arrays(n)
        xy, h, box, u = dets.xy, dets.scales, dets.boxes, dets.unary
        same = same_class_matrix(xy[lo], h[lo], box[lo], xy[hi], h[hi], box[hi])
        for c in range(nc):
            beta[:, c, c] = -(same @ self.theta[(c, c)])
        s, r = distance_angle(xy[lo], h[lo], xy[hi], h[hi])
        bs, br = self.hist.bin_of(s, r)
        pos = self.hist.pos[:, :, bs, br]     # (|C|, |C|, pairs)
        post = pos / (pos + self.hist.neg[:, :, bs, br])
        for c in range(nc):
            for c2 in range(c + 1, nc):
                th = self.theta[(c, c2)]
                # lower-id candidate takes c (it is "first") or c2 (it is "second")
                app_fwd, app_rev = self._appearance_terms(th, u[lo], u[hi], c, c2)
                beta[:, c, c2] = -(th[0] * post[c, c2] + app_fwd + th[-1])
                beta[:, c2, c] = -(th[0] * post[c2, c] + app_rev + th[-1])
        return beta

    def _appearance_terms(self, th, ulo, uhi, c, c2):
        nc = self.n_classes
        if self.appearance == Appearance.FULL:
            ta, tb = th[1:1 + nc], th[1 + nc:1 + 2 * nc]
            return ulo @ ta + uhi @ tb, uhi @ ta + ulo @ tb
        if self.appearance == Appearance.SCALAR:
            return th[1] * ulo[:, c] + th[2] * uhi[:, c2], th[1] * uhi[:, c] + th[2] * ulo[:, c2]
        return 0.0, 0.0

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "pairwise_model",
            "sigma": self.sigma,
            "appearance": self.appearance.value,
            "n_classes": self.n_classes,
            "theta": [
                {"classes": [c, c2], "values": [float(v) for v in self.theta[(c, c2)]]}
                for c, c2 in class_pairs(self.n_classes)
            ],
            "histograms": self.hist.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc):
        _check_doc(doc, "pairwise_model")
        theta = {tuple(e["classes"]): np.array(e["values"], float) for e in doc["theta"]}
        return cls(theta, HistogramPosterior.from_dict(doc["histograms"]), float(doc["sigma"]), doc["appearance"])


# ---------------------------------------------------------------------------
# training from candidates with known origin


@dataclass
class TrainingConfig:
    sigma: float = 1.0
    bins_s: int = 16
    bins_r: int = 16
    s_max: float = 12.0
    appearance: Appearance = Appearance.FULL
    # negatives kept per class pair; the rest are represented through weights
    max_negatives: int = 20_000
    seed: int = 0

    def to_dict(self):
        d = dict(self.__dict__)
        d["appearance"] = Appearance(self.appearance).value
        return d


@dataclass
class _Corpus:
    """All candidate pairs of a set of scenes, stacked."""

    xy: np.ndarray
    h: np.ndarray
    box: np.ndarray
    u: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    part_lo: np.ndarray     # generating class, -1 for clutter
    part_hi: np.ndarray
    same: np.ndarray        # both generated by the same person


def _stack(scenes, n_classes) -> _Corpus:
    xy, h, box, u, lo, hi, plo, phi, same = [], [], [], [], [], [], [], [], []
    off = 0
    for dets in scenes:
        if dets.n_classes != n_classes:
            raise ValueError("all training scenes must share the class set")
        n = len(dets)
        person = np.array([d.origin[0] if d.origin else -1 for d in dets.detections], np.int64)
        part = np.array([d.origin[1] if d.origin else -1 for d in dets.detections], np.int64)
        a, b = pair_arrays(n)
        xy.append(dets.xy)
        h.append(dets.scales)
        box.append(dets.boxes)
        u.append(dets.unary)
        lo.append(a + off)
        hi.append(b + off)
        plo.append(part[a])
        phi.append(part[b])
        same.append((person[a] == person[b]) & (person[a] >= 0))
        off += n
    cat = lambda xs, shape, dt=float: np.concatenate(xs) if xs else np.zeros(shape, dt)  # noqa: E731
    return _Corpus(
        cat(xy, (0, 2)), cat(h, 0), cat(box, (0, 4)), cat(u, (0, n_classes)),
        cat(lo, 0, np.int64), cat(hi, 0, np.int64), cat(plo, 0, np.int64), cat(phi, 0, np.int64),
        cat(same, 0, bool),
    )


def train_model(scenes, n_classes, cfg: TrainingConfig = TrainingConfig()) -> PairwiseModel:
    """Fit histograms, then one logistic model per canonical class pair.

    Every candidate pair is a sample for every class-pair hypothesis. It is
    positive for ``(c, c')`` when both candidates were generated by the same
    person, the lower-id one from part ``c`` and the higher-id one from part
    ``c'``; every other pair is negative. Negatives beyond
    ``max_negatives`` per class pair are subsampled uniformly and the kept
    ones weighted up, so the fit matches the full data in expectation.
    """
    appearance = Appearance(cfg.appearance)
    C = _stack(scenes, n_classes)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))

    # histograms: negatives for (a, b) are all pairs minus that table's positives
    s, r = distance_angle(C.xy[C.lo], C.h[C.lo], C.xy[C.hi], C.h[C.hi])
    shape = (n_classes, n_classes, cfg.bins_s, cfg.bins_r)
    hist = HistogramPosterior(np.zeros(shape), np.zeros(shape), float(cfg.s_max), 1.0)
    bs, br = hist.bin_of(s, r)
    every = np.zeros((cfg.bins_s, cfg.bins_r))
    np.add.at(every, (bs, br), 1.0)
    pos = np.zeros(shape)
    m = C.same & (C.part_lo != C.part_hi)
    np.add.at(pos, (C.part_lo[m], C.part_hi[m], bs[m], br[m]), 1.0)
    for a in range(n_classes):
        for b in range(n_classes):
            if a != b and pos[a, b].sum() == 0:
                raise ValueError(f"no positive pairs for class pair ({a}, {b})")
    neg = every[None, None] - pos
    hist.pos = (pos + 1.0) / (pos + 1.0).sum(axis=(2, 3), keepdims=True)
    hist.neg = (neg + 1.0) / (neg + 1.0).sum(axis=(2, 3), keepdims=True)

    theta = {}
    n_pairs_all = C.lo.shape[0]
    for c, c2 in class_pairs(n_classes):
        if c == c2:
            orient = [(c, c)]
        else:
            orient = [(c, c2), (c2, c)]
        idx, cls_lo, cls_hi, y, w = [], [], [], [], []
        n_neg = sum(n_pairs_all - int(np.sum(C.same & (C.part_lo == a) & (C.part_hi == b))) for a, b in orient)
        keep_p = min(1.0, cfg.max_negatives / max(n_neg, 1))
        for a, b in orient:
            lab = C.same & (C.part_lo == a) & (C.part_hi == b)
            take = lab | (rng.random(n_pairs_all) < keep_p)
            sel = np.nonzero(take)[0]
            idx.append(sel)
            cls_lo.append(np.full(sel.shape[0], a))
            cls_hi.append(np.full(sel.shape[0], b))
            y.append(lab[sel])
            w.append(np.where(lab[sel], 1.0, 1.0 / keep_p))
        idx = np.concatenate(idx)
        y = np.concatenate(y)
        w = np.concatenate(w)
        if not y.any() or y.all():
            raise ValueError(f"class pair ({c}, {c2}) needs positive and negative pairs")
        lo, hi = C.lo[idx], C.hi[idx]
        if c == c2:
            F = same_class_matrix(C.xy[lo], C.h[lo], C.box[lo], C.xy[hi], C.h[hi], C.box[hi])
        else:
            F = _cross_matrix(C.xy, C.h, C.u, lo, hi, np.concatenate(cls_lo), np.concatenate(cls_hi), hist, appearance)
        fit = train_logistic(F, y, cfg.sigma, weights=w)
        theta[(c, c2)] = fit.theta
    return PairwiseModel(theta, hist, cfg.sigma, appearance)


def _cross_matrix(xy, h, u, lo, hi, ca, cb, hist, appearance):
    """Vectorized :func:`cross_class_features` for pairs ``lo < hi`` taking classes ``ca != cb``."""
    s, r = distance_angle(xy[lo], h[lo], xy[hi], h[hi])
    bs, br = hist.bin_of(s, r)
    p = hist.pos[ca, cb, bs, br]
    post = p / (p + hist.neg[ca, cb, bs, br])
    fwd = ca < cb
    first = np.where(fwd, lo, hi)
    second = np.where(fwd, hi, lo)
    cols = [post[:, None]]
    if appearance == Appearance.FULL:
        cols += [u[first], u[second]]
    elif appearance == Appearance.SCALAR:
        cols += [u[first, np.minimum(ca, cb)][:, None], u[second, np.maximum(ca, cb)][:, None]]
    cols.append(np.ones((lo.shape[0], 1)))
    return np.hstack(cols)
