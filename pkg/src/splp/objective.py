"""Log-odds costs and evaluation of the joint objective."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DetectionSet, Mode, ProblemInstance, SolutionTriple, n_pairs, pair_arrays


def _is_mp(v):
    return type(v).__module__.startswith("mpmath")


def _log_odds(p):
    if _is_mp(p):
        import mpmath

        if not 0 < p < 1:
            raise ValueError(f"probability must lie in (0, 1), got {p}")
        return mpmath.log((1 - p) / p)
    arr = np.asarray(p, dtype=float)
    if not np.all((arr > 0) & (arr < 1)):
        raise ValueError("probability must lie in (0, 1)")
    out = np.log1p(-arr) - np.log(arr)
    return float(out) if out.ndim == 0 else out


def unary_cost(p):
    """``log((1 - p) / p)``; accepts scalars, arrays or mpmath numbers."""
    return _log_odds(p)


def pairwise_cost(p):
    """Same log-odds map as :func:`unary_cost`, applied to pairwise probabilities."""
    return _log_odds(p)


def sigmoid(t):
    """Logistic function; computed in the precision of its argument."""
    if _is_mp(t):
        import mpmath

        return 1 / (1 + mpmath.exp(-t))
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ObjectiveValue:
    unary_part: float
    pairwise_part: float

    @property
    def total(self) -> float:
        return self.unary_part + self.pairwise_part


def evaluate(inst: ProblemInstance, sol: SolutionTriple) -> ObjectiveValue:
    """Objective of an integral solution; feasibility is not required.

    ``z`` enters through its definition ``x_dc x_d'c' y_dd'``, so a row of
    ``x`` with several active classes contributes every combination.
    """
    if sol.x.shape != inst.alpha.shape:
        raise ValueError(f"solution x shape {sol.x.shape} != instance {inst.alpha.shape}")
    x = sol.x.astype(float)
    unary = float(np.sum(inst.alpha * x))
    n = inst.n
    if n_pairs(n) == 0:
        return ObjectiveValue(unary, 0.0)
    lo, hi = pair_arrays(n)
    act = np.nonzero(sol.y)[0]
    pw = float(np.einsum("pc,pcd,pd->", x[lo[act]], inst.beta[act], x[hi[act]]))
    return ObjectiveValue(unary, pw)


def build_instance(dets: DetectionSet, model, mode=Mode.MULTI) -> ProblemInstance:
    """Costs from unary probabilities and a trained pairwise model."""
    alpha = unary_cost(dets.unary) if len(dets) else np.zeros((0, dets.n_classes))
    beta = model.predict_costs(dets)
    return ProblemInstance(np.asarray(alpha).reshape(len(dets), dets.n_classes), beta, mode)
