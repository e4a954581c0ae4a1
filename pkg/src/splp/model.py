"""Domain types shared across the package.

Storage conventions
-------------------
* ``x`` is a ``(|D|, |C|)`` 0/1 matrix, ``x[d, c] = 1`` labels candidate ``d``
  with class ``c``; an all-zero row means the candidate is suppressed.
* Unordered candidate pairs ``d < d'`` are enumerated row-major, the same
  order as ``np.triu_indices(n, 1)``. ``y`` and the first axis of ``beta``
  use that order.
* ``beta[p, c, c']`` is the cost of the lower-id candidate of pair ``p``
  taking class ``c`` and the higher-id one taking ``c'``, both in the same
  person.
* ``z`` is never stored; see :func:`derive_z`.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

SCHEMA_VERSION = 1
PROB_EPS = 1e-6


class Mode(str, enum.Enum):
    SINGLE = "single"
    MULTI = "multi"


def clamp_prob(p):
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def n_pairs(n: int) -> int:
    return n * (n - 1) // 2


def pair_index(i: int, j: int, n: int) -> int:
    """Position of the unordered pair {i, j} in row-major upper-triangle order."""
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"invalid pair ({i}, {j}) for n={n}")
    if i > j:
        i, j = j, i
    return i * n - i * (i + 1) // 2 + (j - i - 1)


def pair_arrays(n: int):
    """Endpoint arrays ``(lo, hi)`` of every pair in storage order."""
    lo, hi = np.triu_indices(n, 1)
    return lo.astype(np.int64), hi.astype(np.int64)


# ---------------------------------------------------------------------------
# skeleton


LSP14 = (
    "ankle_r", "knee_r", "hip_r", "hip_l", "knee_l", "ankle_l",
    "wrist_r", "elbow_r", "shoulder_r", "shoulder_l", "elbow_l", "wrist_l",
    "neck", "head",
)

# PCP sticks as (class, class) ids into LSP14
LSP14_STICKS = (
    (0, 1), (1, 2), (5, 4), (4, 3),        # lower / upper legs
    (6, 7), (7, 8), (11, 10), (10, 9),     # lower / upper arms
    (12, 13),                              # head
    (2, 3), (8, 9),                        # hips, shoulders
)

# joint positions of an upright person of unit height, origin at the feet midpoint,
# image y axis pointing down
LSP14_TEMPLATE = np.array([
    [-0.08, 0.00], [-0.08, -0.26], [-0.09, -0.50], [0.09, -0.50], [0.08, -0.26], [0.08, 0.00],
    [-0.22, -0.52], [-0.20, -0.68], [-0.15, -0.82], [0.15, -0.82], [0.20, -0.68], [0.22, -0.52],
    [0.00, -0.86], [0.00, -0.96],
])


@dataclass(frozen=True)
class PartClass:
    id: int
    name: str


def make_classes(names: Sequence[str]) -> tuple[PartClass, ...]:
    if len(names) == 0:
        raise ValueError("need at least one part class")
    return tuple(PartClass(i, str(n)) for i, n in enumerate(names))


def _check_classes(classes):
    if not classes:
        raise ValueError("need at least one part class")
    for i, c in enumerate(classes):
        if c.id != i:
            raise ValueError(f"class ids must be dense 0..|C|-1, got {c.id} at position {i}")


# ---------------------------------------------------------------------------
# detections


@dataclass(frozen=True)
class Detection:
    """One body-part candidate. ``unary`` is clamped into (0, 1) on construction.

    ``origin`` is ``(person, class)`` of the ground-truth part that generated
    the candidate, or None for clutter/unknown. Only training uses it.
    """

    id: int
    x: float
    y: float
    h: float
    box: tuple[float, float, float, float]
    unary: tuple[float, ...]
    origin: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"detection {self.id}: scale must be positive, got {self.h}")
        x0, y0, x1, y1 = self.box
        if x0 > x1 or y0 > y1:
            raise ValueError(f"detection {self.id}: malformed box {self.box}")
        u = np.asarray(self.unary, dtype=float)
        if u.ndim != 1 or not np.all(np.isfinite(u)):
            raise ValueError(f"detection {self.id}: unary must be a finite vector")
        object.__setattr__(self, "unary", tuple(float(v) for v in clamp_prob(u)))
        object.__setattr__(self, "box", tuple(float(v) for v in self.box))
        if self.origin is not None:
            object.__setattr__(self, "origin", (int(self.origin[0]), int(self.origin[1])))

    def to_dict(self):
        return {
            "id": self.id, "x": self.x, "y": self.y, "h": self.h,
            "box": list(self.box), "unary": list(self.unary),
            "origin": None if self.origin is None else {"person": self.origin[0], "part": self.origin[1]},
        }

    @classmethod
    def from_dict(cls, d):
        o = d.get("origin")
        return cls(
            id=int(d["id"]), x=float(d["x"]), y=float(d["y"]), h=float(d["h"]),
            box=tuple(d["box"]), unary=tuple(d["unary"]),
            origin=None if o is None else (o["person"], o["part"]),
        )


@dataclass(frozen=True)
class DetectionSet:
    detections: tuple[Detection, ...]
    classes: tuple[PartClass, ...]
    image_size: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "detections", tuple(self.detections))
        object.__setattr__(self, "classes", tuple(self.classes))
        _check_classes(self.classes)
        nc = len(self.classes)
        for i, d in enumerate(self.detections):
            if d.id != i:
                raise ValueError(f"detection ids must be dense, got {d.id} at position {i}")
            if len(d.unary) != nc:
                raise ValueError(f"detection {i}: unary has {len(d.unary)} entries, expected {nc}")

    def __len__(self):
        return len(self.detections)

    @property
    def n_classes(self):
        return len(self.classes)

    @cached_property
    def xy(self) -> np.ndarray:
        return np.array([[d.x, d.y] for d in self.detections], dtype=float).reshape(-1, 2)

    @cached_property
    def scales(self) -> np.ndarray:
        return np.array([d.h for d in self.detections], dtype=float)

    @cached_property
    def boxes(self) -> np.ndarray:
        return np.array([d.box for d in self.detections], dtype=float).reshape(-1, 4)

    @cached_property
    def unary(self) -> np.ndarray:
        return np.array([d.unary for d in self.detections], dtype=float).reshape(-1, self.n_classes)

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "detections",
            "image_size": list(self.image_size),
            "classes": [{"id": c.id, "name": c.name} for c in self.classes],
            "detections": [d.to_dict() for d in self.detections],
        }

    @classmethod
    def from_dict(cls, doc):
        _check_doc(doc, "detections")
        return cls(
            detections=tuple(Detection.from_dict(d) for d in doc["detections"]),
            classes=tuple(PartClass(int(c["id"]), c["name"]) for c in doc["classes"]),
            image_size=tuple(float(v) for v in doc.get("image_size", (0.0, 0.0))),
        )

    def subset(self, ids: Sequence[int]) -> "DetectionSet":
        """Keep the given candidates (in the given order), re-densifying ids."""
        dets = []
        for new_id, old in enumerate(ids):
            d = self.detections[old]
            dets.append(Detection(new_id, d.x, d.y, d.h, d.box, d.unary, d.origin))
        return DetectionSet(tuple(dets), self.classes, self.image_size)


# ---------------------------------------------------------------------------
# solutions and instances


@dataclass(frozen=True, eq=False)
class SolutionTriple:
    """Binary ``x`` (|D| x |C|) and ``y`` (pairs); ``z`` is implied."""

    x: np.ndarray
    y: np.ndarray
    mode: Mode = Mode.MULTI

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.int8)
        y = np.asarray(self.y, dtype=np.int8).reshape(-1)
        if x.ndim != 2:
            raise ValueError("x must be a |D| x |C| matrix")
        if y.shape[0] != n_pairs(x.shape[0]):
            raise ValueError(f"y has {y.shape[0]} entries, expected {n_pairs(x.shape[0])}")
        if np.any((x != 0) & (x != 1)) or np.any((y != 0) & (y != 1)):
            raise ValueError("solution entries must be 0/1")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "mode", Mode(self.mode))

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def n_classes(self):
        return self.x.shape[1]

    @classmethod
    def empty(cls, n, n_classes, mode=Mode.MULTI):
        return cls(np.zeros((n, n_classes), np.int8), np.zeros(n_pairs(n), np.int8), mode)

    @classmethod
    def from_labels(cls, labels, clusters, n_classes, mode=Mode.MULTI):
        """Build from per-candidate class labels (-1 = suppressed) and cluster ids."""
        labels = np.asarray(labels, dtype=np.int64)
        clusters = np.asarray(clusters, dtype=np.int64)
        n = labels.shape[0]
        x = np.zeros((n, n_classes), np.int8)
        sel = labels >= 0
        x[np.nonzero(sel)[0], labels[sel]] = 1
        lo, hi = pair_arrays(n)
        y = (sel[lo] & sel[hi] & (clusters[lo] == clusters[hi])).astype(np.int8)
        return cls(x, y, mode)

    def labels(self) -> np.ndarray:
        """Class per candidate, -1 when suppressed (first active class if several)."""
        lab = np.argmax(self.x, axis=1).astype(np.int64)
        lab[self.x.sum(axis=1) == 0] = -1
        return lab

    def same_as(self, other: "SolutionTriple") -> bool:
        return (
            self.mode == other.mode
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
        )


def derive_z(sol: SolutionTriple, d: int, d2: int, c: int, c2: int) -> int:
    """``z_{dd'cc'} = x_{dc} * x_{d'c'} * y_{dd'}`` for an integral solution."""
    n, nc = sol.x.shape
    if not (0 <= c < nc and 0 <= c2 < nc):
        raise IndexError(f"class index out of range: ({c}, {c2})")
    p = pair_index(d, d2, n)
    return int(sol.x[d, c]) * int(sol.x[d2, c2]) * int(sol.y[p])


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    alpha: np.ndarray
    beta: np.ndarray
    mode: Mode = Mode.MULTI

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float, ndmin=2)
        if alpha.size == 0:
            alpha = alpha.reshape(0, alpha.shape[1] if alpha.ndim == 2 else 1)
        n, nc = alpha.shape
        beta = np.asarray(self.beta, dtype=float)
        if beta.size == 0:
            beta = beta.reshape(0, nc, nc)
        if beta.shape != (n_pairs(n), nc, nc):
            raise ValueError(f"beta shape {beta.shape} != {(n_pairs(n), nc, nc)}")
        if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))):
            raise ValueError("costs must be finite")
        alpha.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "mode", Mode(self.mode))

    @property
    def n(self):
        return self.alpha.shape[0]

    @property
    def n_classes(self):
        return self.alpha.shape[1]

    def beta_of(self, d: int, d2: int, c: int, c2: int) -> float:
        if d > d2:
            d, d2, c, c2 = d2, d, c2, c
        return float(self.beta[pair_index(d, d2, self.n), c, c2])

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "instance",
            "mode": self.mode.value,
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        _check_doc(doc, "instance")
        alpha = np.array(doc["alpha"], dtype=float)
        nc = alpha.shape[1] if alpha.ndim == 2 else len(doc.get("classes", [])) or 1
        return cls(alpha.reshape(-1, nc), np.array(doc["beta"], dtype=float), Mode(doc["mode"]))


def random_instance(rng: np.random.Generator, n: int, n_classes: int, mode=Mode.MULTI, low=-2.0, high=2.0):
    """Instance with i.i.d. Uniform(low, high) costs."""
    alpha = rng.uniform(low, high, size=(n, n_classes))
    beta = rng.uniform(low, high, size=(n_pairs(n), n_classes, n_classes))
    return ProblemInstance(alpha, beta, mode)


# ---------------------------------------------------------------------------
# poses and ground truth


@dataclass(frozen=True)
class Person:
    """A predicted person. ``parts[c]`` is ``(x, y)`` or None when occluded."""

    parts: tuple[Optional[tuple[float, float]], ...]
    score: float = 1.0
    members: tuple[int, ...] = ()

    def located(self) -> np.ndarray:
        return np.array([p is not None for p in self.parts], dtype=bool)

    def coords(self) -> np.ndarray:
        return np.array([p if p is not None else (np.nan, np.nan) for p in self.parts], dtype=float)


@dataclass(frozen=True)
class PoseResult:
    persons: tuple[Person, ...]
    classes: tuple[PartClass, ...]

    def __post_init__(self):
        object.__setattr__(self, "persons", tuple(self.persons))
        object.__setattr__(self, "classes", tuple(self.classes))
        seen = set()
        for p in self.persons:
            if len(p.parts) != len(self.classes):
                raise ValueError("every person needs one entry per class")
            if seen & set(p.members):
                raise ValueError("a detection belongs to more than one person")
            seen |= set(p.members)

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "poses",
            "classes": [{"id": c.id, "name": c.name} for c in self.classes],
            "persons": [
                {
                    "score": p.score,
                    "members": list(p.members),
                    "parts": [None if q is None else [q[0], q[1]] for q in p.parts],
                }
                for p in self.persons
            ],
        }

    @classmethod
    def from_dict(cls, doc):
        _check_doc(doc, "poses")
        persons = tuple(
            Person(
                parts=tuple(None if q is None else (float(q[0]), float(q[1])) for q in p["parts"]),
                score=float(p["score"]),
                members=tuple(int(m) for m in p["members"]),
            )
            for p in doc["persons"]
        )
        return cls(persons, tuple(PartClass(int(c["id"]), c["name"]) for c in doc["classes"]))


@dataclass(frozen=True, eq=False)
class GTPose:
    joints: np.ndarray                   # (|C|, 2)
    visible: np.ndarray                  # (|C|,) bool
    head_box: Optional[tuple[float, float, float, float]] = None
    torso: Optional[float] = None        # reference size for PCK

    def __post_init__(self):
        j = np.asarray(self.joints, dtype=float).reshape(-1, 2)
        v = np.asarray(self.visible, dtype=bool).reshape(-1)
        if j.shape[0] != v.shape[0]:
            raise ValueError("joints and visibility differ in length")
        if not v.any():
            raise ValueError("a ground-truth person needs at least one visible part")
        object.__setattr__(self, "joints", j)
        object.__setattr__(self, "visible", v)
        if self.head_box is not None:
            object.__setattr__(self, "head_box", tuple(float(b) for b in self.head_box))

    def __eq__(self, other):
        return (
            isinstance(other, GTPose)
            and np.array_equal(self.joints, other.joints)
            and np.array_equal(self.visible, other.visible)
            and self.head_box == other.head_box
            and self.torso == other.torso
        )


@dataclass(frozen=True)
class GroundTruthScene:
    persons: tuple[GTPose, ...]
    classes: tuple[PartClass, ...]
    image_size: tuple[float, float] = (0.0, 0.0)
    sticks: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "persons", tuple(self.persons))
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "sticks", tuple(tuple(int(v) for v in s) for s in self.sticks))
        _check_classes(self.classes)
        for p in self.persons:
            if p.joints.shape[0] != len(self.classes):
                raise ValueError("ground-truth pose does not cover every class")

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "ground_truth",
            "image_size": list(self.image_size),
            "classes": [{"id": c.id, "name": c.name} for c in self.classes],
            "sticks": [list(s) for s in self.sticks],
            "persons": [
                {
                    "joints": p.joints.tolist(),
                    "visible": [bool(v) for v in p.visible],
                    "head_box": None if p.head_box is None else list(p.head_box),
                    "torso": p.torso,
                }
                for p in self.persons
            ],
        }

    @classmethod
    def from_dict(cls, doc):
        _check_doc(doc, "ground_truth")
        return cls(
            persons=tuple(
                GTPose(
                    joints=np.array(p["joints"], dtype=float),
                    visible=np.array(p["visible"], dtype=bool),
                    head_box=None if p.get("head_box") is None else tuple(p["head_box"]),
                    torso=p.get("torso"),
                )
                for p in doc["persons"]
            ),
            classes=tuple(PartClass(int(c["id"]), c["name"]) for c in doc["classes"]),
            image_size=tuple(float(v) for v in doc.get("image_size", (0.0, 0.0))),
            sticks=tuple(tuple(s) for s in doc.get("sticks", ())),
        )


# ---------------------------------------------------------------------------
# json helpers


def _check_doc(doc, kind):
    v = doc.get("schema_version")
    if v != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {v!r} (expected {SCHEMA_VERSION})")
    if doc.get("kind") != kind:
        raise ValueError(f"expected a {kind!r} document, got {doc.get('kind')!r}")


def dumps(obj) -> str:
    """Canonical JSON text (sorted keys, fixed separators) for byte-stable files."""
    if hasattr(obj, "to_dict"):
        obj = obj.to_dict()
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


_LOADERS = {
    "detections": DetectionSet,
    "ground_truth": GroundTruthScene,
    "poses": PoseResult,
    "instance": ProblemInstance,
}


def loads(text: str):
    doc = json.loads(text)
    kind = doc.get("kind")
    if kind not in _LOADERS:
        raise ValueError(f"unknown document kind {kind!r}")
    return _LOADERS[kind].from_dict(doc)


def box_diag(box) -> float:
    x0, y0, x1, y1 = box
    return math.hypot(x1 - x0, y1 - y0)
