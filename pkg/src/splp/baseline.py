"""Two-stage reference pipeline: per-class greedy NMS, then clustering.

Stage one labels each candidate with its most likely class, keeps it when
that probability exceeds 0.5 and suppresses same-class neighbours within
``radius`` mean scales of a stronger kept candidate. Stage two partitions
the survivors by greedy merging on the same pairwise costs the joint model
uses. Labels and suppression are fixed before partitioning, which is what
the joint formulation avoids.
"""
from __future__ import annotations

import numpy as np

from . import kernels
from .model import DetectionSet, Mode, SolutionTriple
from .solver import extract_poses


def greedy_nms(dets: DetectionSet, radius=1.0, min_prob=0.5) -> np.ndarray:
    """Class per candidate after suppression (-1 = dropped)."""
    n = len(dets)
    lab = -np.ones(n, np.int64)
    if n == 0:
        return lab
    u = dets.unary
    cls = np.argmax(u, axis=1)
    score = u[np.arange(n), cls]
    xy, h = dets.xy, dets.scales
    for c in range(dets.n_classes):
        cand = [i for i in np.nonzero((cls == c) & (score > min_prob))[0]]
        cand.sort(key=lambda i: (-score[i], i))
        kept = []
        for i in cand:
            if all(np.hypot(*(xy[i] - xy[j])) > radius * 0.5 * (h[i] + h[j]) for j in kept):
                kept.append(i)
        lab[kept] = c
    return lab


def two_stage(dets: DetectionSet, beta: np.ndarray, mode=Mode.MULTI, radius=1.0):
    """Poses from NMS survivors partitioned by greedy merging on ``beta``."""
    n, nc = len(dets), dets.n_classes
    lab = greedy_nms(dets, radius)
    if mode == Mode.SINGLE:
        cl = np.where(lab >= 0, 0, -1).astype(np.int64)
    else:
        cl = np.where(lab >= 0, np.arange(n), -1).astype(np.int64)
        if n > 1:
            kernels._greedy_merge(np.ascontiguousarray(beta, np.float64), lab, cl, n)
    sol = SolutionTriple.from_labels(lab, cl, nc, mode)
    return sol, extract_poses(sol, dets)

