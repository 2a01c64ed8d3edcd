"""Sequential context-tree weighting in the log domain, plus a brute-force
Bayes-mixture oracle over every tree of bounded depth."""

from __future__ import annotations

import itertools
import math
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .model import CtwPrior, SourceSequence, Suffix, log_prior_mass

MAX_ENUMERATED_TREES = 10**6


def _logaddexp(a: float, b: float) -> float:
    if a < b:
        a, b = b, a
    if b == -math.inf:
        return a
    return a + math.log1p(math.exp(b - a))


def log_dirichlet_evidence(counts: Sequence[float], alpha: Sequence[float]) -> float:
    """ln p^e from the Gamma-function closed form (works for real-valued counts)."""
    a0 = sum(alpha)
    out = math.lgamma(a0) - math.lgamma(a0 + sum(counts))
    for n, a in zip(counts, alpha):
        out += math.lgamma(a + n) - math.lgamma(a)
    return out


class CtwState:
    """CTW working set for one sequence.

    Nodes are keyed by packed suffix codes and hold ``[counts, total, le, lw]``.
    Nodes never visited are implicit with ``le = lw = 0``.
    """

    def __init__(self, prior: CtwPrior, padding: Sequence[int]):
        if len(padding) < prior.depth:
            raise ValueError(f"CTW needs {prior.depth} padding symbols, got {len(padding)}")
        if prior.lam <= 0:
            raise ValueError("CTW needs lambda > 0 (lambda = 0 collapses to the complete depth-D tree)")
        self.prior = prior
        self.A = prior.A
        self.D = prior.depth
        self.alpha = list(prior.alpha)
        self.alpha_sum = sum(self.alpha)
        self.log_lam = math.log(prior.lam)
        self.log_branch = math.log1p(-prior.lam) if prior.lam < 1 else -math.inf
        self.nodes: dict[int, list] = {}
        self.history = [int(x) for x in padding]
        self.n = 0
        self.offsets = [(self.A**l - 1) // (self.A - 1) for l in range(self.D + 2)]
        self.powers = [self.A**l for l in range(self.D + 2)]

    @property
    def log_prob(self) -> float:
        """ln p^w at the root: the mixture log-probability of everything seen."""
        node = self.nodes.get(0)
        return 0.0 if node is None else node[3]

    def path_codes(self) -> list[int]:
        """Base-A codes (without length offset) of s_{n,0}..s_{n,D}."""
        codes = [0]
        c = 0
        h = self.history
        for l in range(self.D):
            c += h[-1 - l] * self.powers[l]
            codes.append(c)
        return codes

    def path_keys(self) -> list[int]:
        return [c + self.offsets[l] for l, c in enumerate(self.path_codes())]

    def child_key(self, code: int, depth: int, q: int) -> int:
        return code + q * self.powers[depth] + self.offsets[depth + 1]

    def node(self, key: int):
        return self.nodes.get(key)

    def node_values(self, key: int) -> tuple[float, float]:
        """(le, lw) of a node, zeros when it has never been visited."""
        node = self.nodes.get(key)
        return (0.0, 0.0) if node is None else (node[2], node[3])

    def children_lw_sum(self, code: int, depth: int) -> float:
        out = 0.0
        nodes = self.nodes
        for q in range(self.A):
            child = nodes.get(self.child_key(code, depth, q))
            if child is not None:
                out += child[3]
        return out

    def _mix(self, le: float, child_sum: float) -> float:
        return _logaddexp(self.log_lam + le, self.log_branch + child_sum)

    def update(self, symbol: int) -> float:
        """Absorb one symbol; returns ln P(symbol | past) (a p^w ratio)."""
        if not 0 <= symbol < self.A:
            raise ValueError(f"symbol {symbol} outside [0, {self.A})")
        before = self.log_prob
        codes = self.path_codes()
        keys = [c + self.offsets[l] for l, c in enumerate(codes)]
        a_x = self.alpha[symbol]
        nodes = self.nodes
        path = []
        for key in keys:
            node = nodes.get(key)
            if node is None:
                node = nodes[key] = [[0] * self.A, 0, 0.0, 0.0]
            # sequential Dirichlet evidence, evaluated before the increment
            node[2] += math.log((a_x + node[0][symbol]) / (self.alpha_sum + node[1]))
            node[0][symbol] += 1
            node[1] += 1
            path.append(node)
        D = self.D
        path[D][3] = path[D][2]
        for l in range(D - 1, -1, -1):
            node = path[l]
            node[3] = self._mix(node[2], self.children_lw_sum(codes[l], l))
        self.history.append(symbol)
        self.n += 1
        return self.log_prob - before

    def extend(self, symbols: Iterable[int]) -> "CtwState":
        for x in symbols:
            self.update(int(x))
        return self

    def hypothetical_log_prob(self, symbol: int) -> float:
        """Root ln p^w if ``symbol`` were appended; touches only the D+1 path nodes."""
        codes = self.path_codes()
        a_x = self.alpha[symbol]
        D = self.D
        new_lw = 0.0
        old_lw = 0.0
        for l in range(D, -1, -1):
            node = self.nodes.get(codes[l] + self.offsets[l])
            if node is None:
                n_x, tot, le, lw = 0, 0, 0.0, 0.0
            else:
                n_x, tot, le, lw = node[0][symbol], node[1], node[2], node[3]
            le_new = le + math.log((a_x + n_x) / (self.alpha_sum + tot))
            if l == D:
                lw_new = le_new
            else:
                child_sum = self.children_lw_sum(codes[l], l) - old_lw + new_lw
                lw_new = self._mix(le_new, child_sum)
            old_lw, new_lw = lw, lw_new
        return new_lw

    def predict(self) -> np.ndarray:
        base = self.log_prob
        return np.array([math.exp(self.hypothetical_log_prob(a) - base) for a in range(self.A)])


def ctw_predict(state: CtwState) -> np.ndarray:
    return state.predict()


def ctw_update(state: CtwState, symbol: int) -> CtwState:
    state.update(symbol)
    return state


def ctw_sequence_logprob(prior: CtwPrior, seq: SourceSequence) -> float:
    """ln P_CTW(x_1..x_N | x_{1-D}..x_0)."""
    state = CtwState(prior, seq.init[len(seq.init) - prior.depth:])
    state.extend(seq.body)
    return state.log_prob


# brute-force oracle ---------------------------------------------------------


def count_trees(A: int, D: int) -> int:
    t = 1
    for _ in range(D):
        t = 1 + t**A
        if t > 10**18:
            break
    return t


def enumerate_trees(A: int, D: int, lam: float | None = None):
    """Every full A-ary tree of depth <= D as a frozenset of leaf suffixes.

    With ``lam`` given, returns ``(tree, prior_mass)`` pairs instead.
    """
    if count_trees(A, D) > MAX_ENUMERATED_TREES:
        raise ValueError(f"refusing to enumerate {count_trees(A, D)} trees (A={A}, D={D})")

    def rec(prefix: Suffix, budget: int) -> list[frozenset]:
        out = [frozenset([prefix])]
        if budget == 0:
            return out
        subtrees = [rec(prefix + (q,), budget - 1) for q in range(A)]
        for combo in itertools.product(*subtrees):
            out.append(frozenset().union(*combo))
        return out

    trees = rec((), D)
    if lam is None:
        return trees
    return [(t, math.exp(log_prior_mass(t, lam, A, D))) for t in trees]


def brute_force_counts(seq: SourceSequence, depth: int) -> dict[Suffix, list[int]]:
    """Counting vectors for every suffix of length <= depth, by direct scanning."""
    full = list(seq.full())
    off = len(seq.init)
    out: dict[Suffix, list[int]] = {}
    for j in range(off, len(full)):
        x = full[j]
        for l in range(depth + 1):
            s = tuple(full[j - 1 - k] for k in range(l))
            out.setdefault(s, [0] * seq.A)[x] += 1
    return out


def _tree_log_evidences(prior: CtwPrior, seq: SourceSequence):
    counts = brute_force_counts(seq, prior.depth)
    zero = [0] * prior.A
    for tree in enumerate_trees(prior.A, prior.depth):
        lp = log_prior_mass(tree, prior.lam, prior.A, prior.depth)
        ev = sum(log_dirichlet_evidence(counts.get(s, zero), prior.alpha) for s in tree)
        yield tree, lp + ev


def bayes_oracle_logprob(prior: CtwPrior, seq: SourceSequence) -> float:
    """ln sum_T pi_D(T) prod_{s in L(T)} p^e_s, summed over every tree explicitly."""
    vals = [v for _, v in _tree_log_evidences(prior, seq)]
    return float(logsumexp(vals))


def bayes_oracle_path_weights(prior: CtwPrior, seq: SourceSequence) -> np.ndarray:
    """Posterior mass of the trees having s_{n,l} as a leaf, l = 0..D."""
    D = prior.depth
    full = seq.full()
    path = tuple(int(full[-1 - k]) for k in range(D))
    buckets: list[list[float]] = [[] for _ in range(D + 1)]
    allv = []
    for tree, v in _tree_log_evidences(prior, seq):
        allv.append(v)
        for l in range(D + 1):
            if path[:l] in tree:
                buckets[l].append(v)
                break
    z = logsumexp(allv)
    return np.array([math.exp(logsumexp(b) - z) if b else 0.0 for b in buckets])


def bayes_oracle_predict(prior: CtwPrior, seq: SourceSequence) -> np.ndarray:
    """Predictive law of the next symbol as a ratio of oracle mixtures."""
    base = bayes_oracle_logprob(prior, seq)
    out = []
    for a in range(prior.A):
        ext = SourceSequence(seq.init, np.append(seq.body, a).astype(np.int64), seq.A)
        out.append(math.exp(bayes_oracle_logprob(prior, ext) - base))
    return np.array(out)
