"""Bayes-optimal next-symbol prediction as a convex blend of per-depth
Dirichlet posterior means along the current suffix path.

The blend weight of depth l is the posterior mass of trees having s_{n,l} as a
leaf.  Successive log-weights differ by

    delta_l = ln(1-lam) - [l == D] ln(lam) + le(s_l) - le(s_{l-1})
              + sum_q lw(q s_{l-1}) - lw(s_l)

where le/lw are the log estimated/weighted evidences of CTW.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .ctw import CtwState, log_dirichlet_evidence
from .model import CtwPrior
from .stats import CountTable, pack_suffix, path_suffixes


@dataclass(frozen=True)
class PathView:
    """Everything the blend needs about one position's suffix path."""

    counts: np.ndarray  # (D+1, A) counting vectors n_{n,s_{n,l}}
    le: np.ndarray  # (D+1,)
    lw: np.ndarray  # (D+1,)
    sibling_lw: np.ndarray  # (D+1,); entry l is sum_q lw(q s_{l-1}), entry 0 unused


@dataclass(frozen=True)
class BlendWeights:
    omega: np.ndarray
    delta: np.ndarray  # delta[l-1] holds delta_l, l = 1..D
    predictives: np.ndarray

    def __post_init__(self):
        if abs(self.omega.sum() - 1.0) > 1e-12:
            raise ValueError("blend weights must sum to one")


def depth_predictives(counts: np.ndarray, alpha: Sequence[float]) -> np.ndarray:
    """Dirichlet posterior means (alpha + n_l) / sum(alpha + n_l), one row per depth."""
    post = np.asarray(counts, dtype=np.float64) + np.asarray(alpha, dtype=np.float64)
    return post / post.sum(axis=1, keepdims=True)


def weight_increments(view: PathView, lam: float) -> np.ndarray:
    D = len(view.le) - 1
    log_branch = math.log1p(-lam) if lam < 1 else -math.inf
    log_lam = math.log(lam)
    delta = np.empty(D)
    for l in range(1, D + 1):
        delta[l - 1] = (
            log_branch
            - (log_lam if l == D else 0.0)
            + view.le[l] - view.le[l - 1]
            + view.sibling_lw[l] - view.lw[l]
        )
    return delta


def weights_from_increments(delta: np.ndarray) -> np.ndarray:
    log_w = np.concatenate([[0.0], np.cumsum(delta)])
    with np.errstate(invalid="ignore"):
        w = np.exp(log_w - logsumexp(log_w))
    return w / w.sum()


def blend_weights(view: PathView, lam: float, alpha: Sequence[float]) -> BlendWeights:
    delta = weight_increments(view, lam)
    return BlendWeights(weights_from_increments(delta), delta, depth_predictives(view.counts, alpha))


def blend_predict(weights: BlendWeights, predictives: np.ndarray | None = None) -> np.ndarray:
    p = weights.predictives if predictives is None else np.asarray(predictives)
    if p.shape[0] != weights.omega.shape[0]:
        raise ValueError("one predictive vector per depth is required")
    return weights.omega @ p


def prior_weights(lam: float, D: int) -> np.ndarray:
    """Blend weights before any data: lam (1-lam)^l, with (1-lam)^D at depth D."""
    w = np.array([lam * (1 - lam) ** l for l in range(D)] + [(1 - lam) ** D])
    return w


# path views -----------------------------------------------------------------


def path_view(state: CtwState) -> PathView:
    """Read the current path (and siblings) off a CTW node store."""
    D, A = state.D, state.A
    codes = state.path_codes()
    counts = np.zeros((D + 1, A))
    le = np.zeros(D + 1)
    lw = np.zeros(D + 1)
    sib = np.zeros(D + 1)
    for l, c in enumerate(codes):
        node = state.node(c + state.offsets[l])
        if node is not None:
            counts[l] = node[0]
            le[l], lw[l] = node[2], node[3]
        if l:
            sib[l] = state.children_lw_sum(codes[l - 1], l - 1)
    return PathView(counts, le, lw, sib)


class SubtreeEvidence:
    """ln p^w of any node, recomputed from a CountTable by recursion over visited
    children.  Values are cached per (node, visit total): a node's subtree can
    only change when the node itself is visited again."""

    def __init__(self, table: CountTable, prior: CtwPrior):
        if table.max_order < prior.depth:
            raise ValueError("count table is shallower than the prior depth")
        self.table = table
        self.prior = prior
        self.log_lam = math.log(prior.lam)
        self.log_branch = math.log1p(-prior.lam) if prior.lam < 1 else -math.inf
        self._cache: dict[int, tuple[int, float]] = {}

    def le(self, s: tuple[int, ...]) -> float:
        n = self.table.counts.get(pack_suffix(s, self.table.A))
        return 0.0 if n is None else log_dirichlet_evidence(n.tolist(), self.prior.alpha)

    def lw(self, s: tuple[int, ...]) -> float:
        key = pack_suffix(s, self.table.A)
        n = self.table.counts.get(key)
        if n is None:
            return 0.0
        tot = int(n.sum())
        hit = self._cache.get(key)
        if hit is not None and hit[0] == tot:
            return hit[1]
        le = log_dirichlet_evidence(n.tolist(), self.prior.alpha)
        if len(s) == self.prior.depth:
            val = le
        else:
            child = sum(self.lw(s + (q,)) for q in range(self.table.A))
            a, b = self.log_lam + le, self.log_branch + child
            val = max(a, b) + math.log1p(math.exp(-abs(a - b))) if b > -math.inf else a
        self._cache[key] = (tot, val)
        return val


def path_view_from_counts(table: CountTable, prior: CtwPrior, evidence: SubtreeEvidence | None = None) -> PathView:
    """Same view as ``path_view`` but rebuilt from raw counts with closed-form
    evidences; shares no arithmetic with the sequential CTW update."""
    ev = evidence or SubtreeEvidence(table, prior)
    D, A = prior.depth, table.A
    path = path_suffixes(table.history, D)
    counts = np.stack([table.get(s) for s in path]).astype(np.float64)
    le = np.array([ev.le(s) for s in path])
    lw = np.array([ev.lw(s) for s in path])
    sib = np.zeros(D + 1)
    for l in range(1, D + 1):
        sib[l] = sum(ev.lw(path[l - 1] + (q,)) for q in range(A))
    return PathView(counts, le, lw, sib)


class BlendPredictor:
    """Sequential predictor: CTW node store for the evidences, blend for the law."""

    name = "blend"

    def __init__(self, prior: CtwPrior, padding: Sequence[int]):
        self.prior = prior
        self.state = CtwState(prior, padding)

    def predict(self) -> np.ndarray:
        return blend_predict(blend_weights(path_view(self.state), self.prior.lam, self.prior.alpha))

    def update(self, symbol: int) -> None:
        self.state.update(symbol)
