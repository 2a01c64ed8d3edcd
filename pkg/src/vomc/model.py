"""Context-tree sources: alphabets, tree shapes, priors, sampling and generation.

Suffixes are stored most-recent-first: ``(x_n, x_{n-1}, ...)``.  Sequences and
contexts are plain chronological arrays (oldest symbol first); the flip happens
only where a context is walked down a tree.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

Suffix = tuple[int, ...]

MAX_ALPHABET = 256


class ModelInvariantError(ValueError):
    """A context tree violates fullness, properness or normalisation."""


def make_rng(seed: int | Sequence[int]) -> np.random.Generator:
    """Seeded Philox (counter-based, 64-bit) generator; bit-identical across platforms."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


@dataclass(frozen=True)
class Alphabet:
    size: int

    def __post_init__(self):
        if not 2 <= self.size <= MAX_ALPHABET:
            raise ValueError(f"alphabet size must be in [2, {MAX_ALPHABET}], got {self.size}")

    def __contains__(self, symbol) -> bool:
        return 0 <= int(symbol) < self.size


@dataclass(frozen=True)
class CtwPrior:
    """Branching-process tree prior with i.i.d. Dirichlet leaves."""

    depth: int
    lam: float = 0.15
    alpha: tuple[float, ...] = (0.5, 0.5, 0.5)

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if len(self.alpha) < 2:
            raise ValueError("alpha needs one entry per symbol (A >= 2)")
        if any(a <= 0 for a in self.alpha):
            raise ValueError("Dirichlet parameters must be positive")
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))

    @classmethod
    def symmetric(cls, depth: int, lam: float = 0.15, alpha: float = 0.5, A: int = 3) -> "CtwPrior":
        return cls(depth, lam, (alpha,) * A)

    @property
    def A(self) -> int:
        return len(self.alpha)


@dataclass(frozen=True)
class ContextTree:
    """A full A-ary tree given by its leaf suffixes, each with a next-symbol law.

    ``leaves`` maps most-recent-first suffixes to probability vectors; a tree
    that has only been shaped (no laws yet) carries ``None`` values.
    """

    A: int
    depth: int
    leaves: dict[Suffix, np.ndarray | None]
    _lookup: np.ndarray = field(init=False, repr=False, compare=False)
    _order: tuple[Suffix, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self._check_full()
        order = tuple(self.iter_leaves())
        object.__setattr__(self, "_order", order)
        index = {s: k for k, s in enumerate(order)}
        # every length-D context (packed most-recent-first, base A) -> leaf index
        lookup = np.empty(self.A ** self.depth, dtype=np.int64)
        for code in range(lookup.size):
            ctx = []
            c = code
            for _ in range(self.depth):
                ctx.append(c % self.A)
                c //= self.A
            lookup[code] = index[self._walk(ctx)]
        object.__setattr__(self, "_lookup", lookup)
        for s, p in self.leaves.items():
            if p is None:
                continue
            p = np.asarray(p, dtype=np.float64)
            if p.shape != (self.A,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
                raise ModelInvariantError(f"leaf {s} does not carry a probability vector")
            self.leaves[s] = p

    def _check_full(self):
        if not self.leaves:
            raise ModelInvariantError("tree has no leaves")
        internal = set()
        for s in self.leaves:
            if len(s) > self.depth:
                raise ModelInvariantError(f"leaf {s} deeper than D={self.depth}")
            if any(not 0 <= q < self.A for q in s):
                raise ModelInvariantError(f"leaf {s} has out-of-range symbols")
            for l in range(len(s)):
                internal.add(s[:l])
        if internal & self.leaves.keys():
            raise ModelInvariantError("suffix set is not proper")
        for node in internal:
            for q in range(self.A):
                child = node + (q,)
                if child not in internal and child not in self.leaves:
                    raise ModelInvariantError(f"node {node} is not full (missing child {q})")

    def _walk(self, recent_first: Sequence[int]) -> Suffix:
        s: Suffix = ()
        while s not in self.leaves:
            if len(s) >= len(recent_first):
                raise ModelInvariantError("context shorter than the tree path")
            s = s + (int(recent_first[len(s)]),)
        return s

    def iter_leaves(self) -> Iterator[Suffix]:
        """Leaves in preorder (children visited in symbol order)."""

        def rec(s):
            if s in self.leaves:
                yield s
                return
            for q in range(self.A):
                yield from rec(s + (q,))

        yield from rec(())

    def classify(self, context: Sequence[int]) -> Suffix:
        """Leaf matching the most recent symbols of a chronological context."""
        if len(context) < self.depth:
            raise ValueError(f"context needs at least D={self.depth} symbols")
        return self._walk(list(context[::-1][: self.depth]))

    def leaf_index(self, code: int) -> int:
        return int(self._lookup[code])

    @property
    def leaf_order(self) -> tuple[Suffix, ...]:
        return self._order

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    def n_leaves_at_depth(self, d: int) -> int:
        return sum(1 for s in self.leaves if len(s) == d)

    def has_distributions(self) -> bool:
        return all(p is not None for p in self.leaves.values())

    def prob_matrix(self) -> np.ndarray:
        """(n_leaves, A) array in ``leaf_order``."""
        if not self.has_distributions():
            raise ModelInvariantError("tree has no leaf distributions yet")
        return np.stack([self.leaves[s] for s in self._order])

    def with_distributions(self, probs: dict[Suffix, np.ndarray]) -> "ContextTree":
        return ContextTree(self.A, self.depth, {s: probs[s] for s in self.leaves})

    def shape(self) -> frozenset[Suffix]:
        return frozenset(self.leaves)

    # serialisation ------------------------------------------------------

    def to_json(self, lam: float | None = None) -> str:
        nodes = []

        def rec(s):
            if s in self.leaves:
                p = self.leaves[s]
                nodes.append({
                    "suffix": list(s),
                    "leaf": True,
                    "p": None if p is None else [repr_17(v) for v in p],
                })
                return
            nodes.append({"suffix": list(s), "leaf": False})
            for q in range(self.A):
                rec(s + (q,))

        rec(())
        doc = {"D": self.depth, "lambda_used": lam, "alphabet": self.A, "nodes": nodes}
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ContextTree":
        doc = json.loads(text)
        leaves = {}
        for node in doc["nodes"]:
            if node["leaf"]:
                p = node.get("p")
                leaves[tuple(node["suffix"])] = None if p is None else np.array([float(v) for v in p])
        return cls(int(doc["alphabet"]), int(doc["D"]), leaves)


def repr_17(x: float) -> str:
    return format(float(x), ".17g")


def prior_mass(tree: ContextTree | frozenset, lam: float, A: int | None = None, depth: int | None = None) -> float:
    """pi_D(T) = (1-lam)^((|L|-1)/(A-1)) * lam^(|L| - |L_D|)."""
    return math.exp(log_prior_mass(tree, lam, A, depth))


def log_prior_mass(tree, lam, A=None, depth=None) -> float:
    if isinstance(tree, ContextTree):
        leaves, A, depth = tree.leaves.keys(), tree.A, tree.depth
    else:
        leaves = tree
    n = len(leaves)
    n_d = sum(1 for s in leaves if len(s) == depth)
    out = 0.0
    n_internal = (n - 1) // (A - 1)
    if n_internal:
        out += n_internal * math.log1p(-lam) if lam < 1 else -math.inf
    if n - n_d:
        out += (n - n_d) * math.log(lam) if lam > 0 else -math.inf
    return out


# sampling ------------------------------------------------------------------


def sample_tree(prior: CtwPrior, rng: np.random.Generator) -> ContextTree:
    """Draw a tree shape from the bounded branching process (no leaf laws yet)."""
    A, D, lam = prior.A, prior.depth, prior.lam
    leaves: dict[Suffix, None] = {}
    stack: list[Suffix] = [()]
    while stack:
        s = stack.pop()
        if len(s) == D or rng.random() < lam:
            leaves[s] = None
        else:
            stack.extend(s + (q,) for q in reversed(range(A)))
    return ContextTree(A, D, leaves)


def sample_leaf_distributions(tree: ContextTree, alpha: Sequence[float], rng: np.random.Generator) -> ContextTree:
    """Independent Dirichlet(alpha) law per leaf, via normalised Gamma draws."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (tree.A,):
        raise ValueError("alpha must have one entry per symbol")
    if np.any(alpha <= 0):
        raise ValueError("Dirichlet parameters must be positive")
    probs = {}
    for s in tree.leaf_order:
        g = rng.standard_gamma(alpha)
        total = g.sum()
        if total == 0.0:
            # all draws underflowed (tiny alpha): fall back to a point mass
            g = np.zeros(tree.A)
            g[int(rng.integers(tree.A))] = 1.0
            total = 1.0
        probs[s] = g / total
    return tree.with_distributions(probs)


def sample_nonctw_leaf_distributions(tree: ContextTree, rng: np.random.Generator) -> ContextTree:
    """One uniformly chosen symbol per leaf gets probability 0; the rest are
    i.i.d. Uniform(0, 1) weights, normalised."""
    A = tree.A
    probs = {}
    for s in tree.leaf_order:
        zero = int(rng.integers(A))
        w = rng.random(A)
        w[zero] = 0.0
        if w.sum() == 0.0:
            w[(zero + 1) % A] = 1.0
        probs[s] = w / w.sum()
    return tree.with_distributions(probs)


def sample_ctw_source(prior: CtwPrior, rng: np.random.Generator) -> ContextTree:
    return sample_leaf_distributions(sample_tree(prior, rng), prior.alpha, rng)


# sequences -----------------------------------------------------------------


@dataclass(frozen=True)
class SourceSequence:
    """Body x_1..x_N plus the D-symbol initial context x_{1-D}..x_0."""

    init: np.ndarray
    body: np.ndarray
    A: int
    tree_id: int = 0
    seed: int | None = None

    def __post_init__(self):
        for name in ("init", "body"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            if arr.size and (arr.min() < 0 or arr.max() >= self.A):
                raise ValueError(f"{name} has symbols outside [0, {self.A})")
            object.__setattr__(self, name, arr)

    @property
    def depth(self) -> int:
        return len(self.init)

    def __len__(self) -> int:
        return len(self.body)

    def full(self) -> np.ndarray:
        return np.concatenate([self.init, self.body])


def sample_initial_context(A: int, D: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, A, size=D)


def generate_sequence(
    tree: ContextTree,
    N: int,
    init: Sequence[int],
    rng: np.random.Generator,
    tree_id: int = 0,
    seed: int | None = None,
) -> SourceSequence:
    """Emit N symbols, each from the law of the leaf matching the preceding context."""
    if N < 1:
        raise ValueError("N must be >= 1")
    A, D = tree.A, tree.depth
    init = np.asarray(init, dtype=np.int64)
    if len(init) < D:
        raise ValueError(f"initial context needs D={D} symbols")
    cdf = np.cumsum(tree.prob_matrix(), axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(N)
    body = np.empty(N, dtype=np.int64)
    mod = A ** D
    code = 0
    for x in init[len(init) - D:]:
        code = (code * A + int(x)) % mod if D else 0
    # rolling base-A code of the last D symbols, most recent least significant
    for i in range(N):
        leaf = tree.leaf_index(code)
        x = int(np.searchsorted(cdf[leaf], u[i], side="right"))
        if x >= A:
            x = A - 1
        body[i] = x
        if D:
            code = (code * A + x) % mod
    return SourceSequence(init, body, A, tree_id, seed)


def context_leaf_indices(tree: ContextTree, seq: SourceSequence) -> np.ndarray:
    """Leaf index used to emit each body symbol."""
    A, D = tree.A, tree.depth
    full = seq.full()
    off = len(seq.init) - D
    mod = A ** D
    code = 0
    for x in full[off:off + D]:
        code = (code * A + int(x)) % mod if D else 0
    out = np.empty(len(seq.body), dtype=np.int64)
    for i, x in enumerate(seq.body):
        out[i] = tree.leaf_index(code)
        if D:
            code = (code * A + int(x)) % mod
    return out


def true_model_losses(tree: ContextTree, seq: SourceSequence) -> np.ndarray:
    """Per-symbol ln(1/p_true(x_i)); +inf where the true law assigns zero."""
    leaves = context_leaf_indices(tree, seq)
    p = tree.prob_matrix()[leaves, seq.body]
    with np.errstate(divide="ignore"):
        return -np.log(p)


def true_model_logloss(tree: ContextTree, seq: SourceSequence) -> float:
    """Genie rate in nats/symbol (inf if the sequence hits a zero-probability symbol)."""
    return float(np.mean(true_model_losses(tree, seq)))


def leaf_entropies(tree: ContextTree) -> np.ndarray:
    p = tree.prob_matrix()
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(p > 0, p * np.log(p), 0.0).sum(axis=1)
    return h
