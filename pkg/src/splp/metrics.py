"""Pose evaluation: PCK / PCKh with AUC, strict PCP, mAP over consistent
configurations, and accuracy of occlusion prediction (AOP).

Reference sizes: PCK uses the ground-truth torso diagonal, PCKh uses
``head_scale`` times the head-box diagonal.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .model import GroundTruthScene, Person, PoseResult, box_diag


class Reference(str, enum.Enum):
    TORSO = "torso"
    HEAD = "head"


@dataclass(frozen=True)
class MatchConfig:
    pck_threshold: float = 0.2
    pckh_threshold: float = 0.5
    reference: Reference = Reference.TORSO
    head_scale: float = 0.5
    auc_range: tuple = (0.0, 0.2, 21)     # start, stop, number of thresholds
    pcp_factor: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "reference", Reference(self.reference))
        if not (self.pck_threshold > 0 and self.pckh_threshold > 0 and self.head_scale > 0):
            raise ValueError("thresholds must be positive")
        lo, hi, k = self.auc_range
        if not (hi > lo >= 0 and int(k) >= 2):
            raise ValueError("auc_range must be (start, stop > start, count >= 2)")

    def thresholds(self):
        lo, hi, k = self.auc_range
        return np.linspace(lo, hi, int(k))


@dataclass
class PartScores:
    """Per-entry fractions (NaN where nothing was evaluated) and their mean."""

    names: list
    values: np.ndarray
    counts: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        ok = self.counts > 0
        return float(np.mean(self.values[ok])) if ok.any() else float("nan")

    def to_dict(self):
        return {
            "names": list(self.names),
            "values": [None if np.isnan(v) else float(v) for v in self.values],
            "counts": [int(c) for c in self.counts],
            "mean": None if np.isnan(self.mean) else self.mean,
            **self.extra,
        }

    def table(self, title="", percent=True) -> str:
        return format_table([title], [self.values], self.names, percent)


def format_table(rows, values, names, percent=True) -> str:
    """Aligned text table: one row per setting, one column per part plus the mean."""
    cols = list(names) + ["mean"]
    width = max(6, *(len(c) for c in cols))
    lead = max(8, *(len(r) for r in rows))
    out = [" " * lead + " ".join(c.rjust(width) for c in cols)]
    for r, v in zip(rows, values):
        v = np.asarray(v, float)
        vals = list(v) + [float(np.nanmean(v)) if np.any(~np.isnan(v)) else float("nan")]
        cells = []
        for x in vals:
            if np.isnan(x):
                cells.append("-".rjust(width))
            else:
                cells.append((f"{100 * x:.1f}" if percent else f"{x:.3f}").rjust(width))
        out.append(r.ljust(lead) + " " + " ".join(cells))
    return "\n".join(out)


def _as_lists(pred, gt):
    if isinstance(pred, PoseResult):
        pred = [pred]
    if isinstance(gt, GroundTruthScene):
        gt = [gt]
    pred, gt = list(pred), list(gt)
    if len(pred) != len(gt):
        raise ValueError(f"{len(pred)} predictions for {len(gt)} ground-truth scenes")
    return pred, gt


def ref_size(pose, reference: Reference, cfg: MatchConfig) -> float:
    if reference == Reference.TORSO:
        if pose.torso is None:
            raise ValueError("ground truth lacks a torso size")
        return float(pose.torso)
    if pose.head_box is None:
        raise ValueError("ground truth lacks a head box")
    return cfg.head_scale * box_diag(pose.head_box)


def _hits(person, pose, radius):
    """Per class: predicted and within ``radius`` of a visible ground-truth joint."""
    pc = person.coords()
    d = np.hypot(*(pc - pose.joints).T)
    with np.errstate(invalid="ignore"):
        return person.located() & pose.visible & (d <= radius)


# ---------------------------------------------------------------------------
# single person


def pck(pred, gt, cfg: MatchConfig = MatchConfig(), threshold=None, reference=None) -> PartScores:
    """Fraction of visible ground-truth joints predicted within ``threshold * reference``.

    Persons are matched by position in the lists; a scene with a different
    number of predicted and ground-truth persons is an error.
    """
    pred, gt = _as_lists(pred, gt)
    reference = Reference(reference or cfg.reference)
    if threshold is None:
        threshold = cfg.pck_threshold if reference == Reference.TORSO else cfg.pckh_threshold
    nc = len(gt[0].classes) if gt else 0
    hit = np.zeros(nc)
    cnt = np.zeros(nc, np.int64)
    for k, (pr, g) in enumerate(zip(pred, gt)):
        if len(pr.persons) != len(g.persons):
            raise ValueError(f"scene {k}: {len(pr.persons)} predicted persons for {len(g.persons)} in ground truth")
        for person, pose in zip(pr.persons, g.persons):
            hit += _hits(person, pose, threshold * ref_size(pose, reference, cfg))
            cnt += pose.visible
    vals = np.divide(hit, cnt, out=np.full(nc, np.nan), where=cnt > 0)
    names = [c.name for c in gt[0].classes] if gt else []
    return PartScores(names, vals, cnt)


def pck_curve(pred, gt, cfg: MatchConfig = MatchConfig(), reference=None):
    ts = cfg.thresholds()
    return ts, np.array([pck(pred, gt, cfg, t, reference).mean for t in ts])


def auc(thresholds, values) -> float:
    """Trapezoidal area under a PCK curve, normalized by the threshold range."""
    t = np.asarray(thresholds, float)
    v = np.asarray(values, float)
    if t.shape != v.shape or t.size < 2:
        raise ValueError("need matching threshold and value arrays with at least two points")
    span = t[-1] - t[0]
    if not span > 0:
        raise ValueError("thresholds must increase")
    area = np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(t)) / span
    # a weighted mean of the curve; clip the rounding that can leave its range
    return float(np.clip(area, v.min(), v.max()))


def pcp(pred, gt, cfg: MatchConfig = MatchConfig()) -> PartScores:
    """Strict PCP: both stick endpoints within ``pcp_factor`` of the stick length.

    Sticks with an occluded ground-truth endpoint are not counted.
    """
    pred, gt = _as_lists(pred, gt)
    sticks = list(gt[0].sticks) if gt else []
    hit = np.zeros(len(sticks))
    cnt = np.zeros(len(sticks), np.int64)
    for k, (pr, g) in enumerate(zip(pred, gt)):
        if len(pr.persons) != len(g.persons):
            raise ValueError(f"scene {k}: {len(pr.persons)} predicted persons for {len(g.persons)} in ground truth")
        for person, pose in zip(pr.persons, g.persons):
            pc, ok = person.coords(), person.located()
            for s, (a, b) in enumerate(sticks):
                if not (pose.visible[a] and pose.visible[b]):
                    continue
                cnt[s] += 1
                if not (ok[a] and ok[b]):
                    continue
                L = np.linalg.norm(pose.joints[a] - pose.joints[b])
                ea = np.linalg.norm(pc[a] - pose.joints[a])
                eb = np.linalg.norm(pc[b] - pose.joints[b])
                hit[s] += (ea <= cfg.pcp_factor * L) and (eb <= cfg.pcp_factor * L)
    vals = np.divide(hit, cnt, out=np.full(len(sticks), np.nan), where=cnt > 0)
    names = [f"{gt[0].classes[a].name}-{gt[0].classes[b].name}" for a, b in sticks] if gt else []
    return PartScores(names, vals, cnt)


# ---------------------------------------------------------------------------
# multi person


def pckh_overlap(person, pose, cfg: MatchConfig) -> float:
    """Fraction of the ground-truth person's visible joints hit under PCKh."""
    r = cfg.pckh_threshold * ref_size(pose, Reference.HEAD, cfg)
    return float(_hits(person, pose, r).sum() / pose.visible.sum())


def assign(pred: PoseResult, gt: GroundTruthScene, cfg: MatchConfig = MatchConfig()):
    """Greedy one-to-one assignment by decreasing PCKh overlap.

    Ties go to the more confident prediction, then the lower prediction
    index. Pairs without overlap are never assigned. Returns a list with
    the ground-truth index (or -1) for every predicted person.
    """
    cand = []
    for i, person in enumerate(pred.persons):
        for j, pose in enumerate(gt.persons):
            ov = pckh_overlap(person, pose, cfg)
            if ov > 0:
                cand.append((-ov, -person.score, i, j))
    cand.sort()
    out = [-1] * len(pred.persons)
    used = set()
    for _, _, i, j in cand:
        if out[i] < 0 and j not in used:
            out[i] = j
            used.add(j)
    return out


def _ap(scores, tp, npos):
    if npos == 0:
        return float("nan")
    order = np.argsort(-np.asarray(scores, float), kind="stable")
    tp = np.asarray(tp, float)[order]
    if tp.size == 0:
        return 0.0
    ctp = np.cumsum(tp)
    rec = ctp / npos
    prec = ctp / np.arange(1, tp.size + 1)
    # precision envelope, then area under the recall steps
    env = np.maximum.accumulate(prec[::-1])[::-1]
    r_prev = np.concatenate([[0.0], rec[:-1]])
    return float(np.sum((rec - r_prev) * env))


def map_multi(pred, gt, cfg: MatchConfig = MatchConfig()) -> PartScores:
    """Per-part AP after assigning predicted persons to ground truth.

    Every located part of every predicted person is one detection scored by
    the person's confidence. It is a true positive when its person is
    assigned to a ground-truth person whose joint is visible and within the
    PCKh radius. Unassigned persons contribute only false positives.
    """
    pred, gt = _as_lists(pred, gt)
    nc = len(gt[0].classes) if gt else 0
    entries = [[] for _ in range(nc)]     # (score, scene, person, tp)
    npos = np.zeros(nc, np.int64)
    for k, (pr, g) in enumerate(zip(pred, gt)):
        for pose in g.persons:
            npos += pose.visible
        match = assign(pr, g, cfg)
        # persons enter in a canonical order so list order does not matter
        order = sorted(range(len(pr.persons)), key=lambda i: (-pr.persons[i].score, i))
        for rank, i in enumerate(order):
            person = pr.persons[i]
            located = person.located()
            hits = None
            if match[i] >= 0:
                pose = g.persons[match[i]]
                hits = _hits(person, pose, cfg.pckh_threshold * ref_size(pose, Reference.HEAD, cfg))
            for c in np.nonzero(located)[0]:
                entries[c].append((person.score, k, rank, bool(hits is not None and hits[c])))
    vals = np.full(nc, np.nan)
    for c in range(nc):
        ent = sorted(entries[c], key=lambda e: (-e[0], e[1], e[2]))
        vals[c] = _ap([e[0] for e in ent], [e[3] for e in ent], int(npos[c]))
    names = [c.name for c in gt[0].classes] if gt else []
    return PartScores(names, vals, npos)


def aop(pred, gt, cfg: MatchConfig = MatchConfig()) -> float:
    """Share of (assigned person, part) slots whose visible/occluded state is right."""
    pred, gt = _as_lists(pred, gt)
    good = total = 0
    for pr, g in zip(pred, gt):
        for i, j in enumerate(assign(pr, g, cfg)):
            if j < 0:
                continue
            same = pr.persons[i].located() == g.persons[j].visible
            good += int(same.sum())
            total += same.size
    return good / total if total else float("nan")


def person_count_accuracy(pred, gt, min_parts=1) -> float:
    """Share of scenes whose number of predicted persons (with at least ``min_parts`` located parts) is right."""
    pred, gt = _as_lists(pred, gt)
    if not pred:
        return float("nan")
    ok = sum(
        sum(int(p.located().sum()) >= min_parts for p in pr.persons) == len(g.persons)
        for pr, g in zip(pred, gt)
    )
    return ok / len(pred)


def gt_as_prediction(gt: GroundTruthScene) -> PoseResult:
    """The ground truth itself as a prediction (visible joints only, confidence 1)."""
    persons = tuple(
        Person(tuple((float(x), float(y)) if v else None for (x, y), v in zip(p.joints, p.visible)), 1.0)
        for p in gt.persons
    )
    return PoseResult(persons, gt.classes)
