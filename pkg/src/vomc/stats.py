"""Suffix occurrence counts and the forward/backward k-gram statistics.

``n_{i,s}(a)`` counts how often symbol ``a`` followed suffix ``s`` among the
emitted symbols x_1..x_i.  Padding symbols x_{1-D}..x_0 may be part of a
matched suffix but are never counted as emitted.
"""

from __future__ import annotations

import csv
import io
from typing import Sequence

import numpy as np

from .model import Suffix


def pack_suffix(s: Sequence[int], A: int) -> int:
    """Unique integer key for a most-recent-first suffix of any length."""
    code = 0
    for q in reversed(s):
        code = code * A + q
    # offset by the number of strictly shorter strings so lengths never collide
    return code + (A ** len(s) - 1) // (A - 1)


def unpack_suffix(key: int, A: int) -> Suffix:
    l = 0
    while key >= (A ** (l + 1) - 1) // (A - 1):
        l += 1
    code = key - (A ** l - 1) // (A - 1)
    out = []
    for _ in range(l):
        out.append(code % A)
        code //= A
    return tuple(out)


class CountTable:
    """Sparse map from packed suffixes (length <= max_order) to counting vectors."""

    def __init__(self, A: int, max_order: int, padding: Sequence[int] = ()):
        if A < 2:
            raise ValueError("alphabet size must be >= 2")
        self.A = A
        self.max_order = max_order
        self.counts: dict[int, np.ndarray] = {}
        self.i = 0
        self.history: list[int] = [int(x) for x in padding]
        self.n_padding = len(self.history)

    def copy(self) -> "CountTable":
        out = CountTable.__new__(CountTable)
        out.A, out.max_order, out.i = self.A, self.max_order, self.i
        out.counts = {k: v.copy() for k, v in self.counts.items()}
        out.history = list(self.history)
        out.n_padding = self.n_padding
        return out

    def context(self, length: int | None = None) -> Suffix:
        """Most-recent-first view of the last ``length`` symbols (padding included)."""
        if length is None:
            length = self.max_order
        length = min(length, len(self.history))
        return tuple(self.history[-1 - j] for j in range(length))

    def update(self, symbol: int) -> None:
        if not 0 <= symbol < self.A:
            raise ValueError(f"symbol {symbol} outside [0, {self.A})")
        A = self.A
        code = 0
        span = A ** 0
        offset = 0
        hist = self.history
        depth = min(self.max_order, len(hist))
        for l in range(depth + 1):
            key = code + offset
            vec = self.counts.get(key)
            if vec is None:
                vec = self.counts[key] = np.zeros(A, dtype=np.int64)
            vec[symbol] += 1
            if l < depth:
                code += hist[-1 - l] * span
                offset += span
                span *= A
        hist.append(symbol)
        self.i += 1

    def extend(self, symbols: Sequence[int]) -> "CountTable":
        for x in symbols:
            self.update(int(x))
        return self

    def get(self, s: Sequence[int]) -> np.ndarray:
        vec = self.counts.get(pack_suffix(s, self.A))
        return np.zeros(self.A, dtype=np.int64) if vec is None else vec.copy()

    def total(self, s: Sequence[int]) -> int:
        vec = self.counts.get(pack_suffix(s, self.A))
        return 0 if vec is None else int(vec.sum())

    def __iter__(self):
        for key in sorted(self.counts):
            yield unpack_suffix(key, self.A), self.counts[key]

    def to_csv(self) -> str:
        """Debug dump: one row per visited suffix, sorted by (length, suffix)."""
        rows = sorted(((len(s), s), v) for s, v in self)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["suffix"] + [f"n{a}" for a in range(self.A)])
        for (_, s), v in rows:
            w.writerow([" ".join(map(str, s))] + [int(c) for c in v])
        return buf.getvalue()


def _uniform(A: int) -> np.ndarray:
    return np.full(A, 1.0 / A)


def forward_stats(table: CountTable, s: Sequence[int]) -> np.ndarray:
    """Empirical next-symbol law after suffix ``s``; uniform if ``s`` never occurred."""
    n = table.get(s)
    tot = n.sum()
    return n / tot if tot else _uniform(table.A)


def backward_stats(table: CountTable, s: Sequence[int]) -> np.ndarray:
    """Empirical law of the symbol preceding ``s``:
    ``g(a) = sum_q n_{i,as}(q) / sum_q n_{i,s}(q)``, uniform if ``s`` never occurred."""
    if len(s) + 1 > table.max_order:
        raise ValueError("backward statistics need counts one order deeper than the suffix")
    tot = table.total(s)
    if not tot:
        return _uniform(table.A)
    s = tuple(s)
    return np.array([table.total(s + (a,)) for a in range(table.A)], dtype=np.float64) / tot


def path_suffixes(context: Sequence[int], depth: int) -> list[Suffix]:
    """s_{n,0}, ..., s_{n,depth} for a chronological context."""
    rf = tuple(int(x) for x in context[::-1][:depth])
    if len(rf) < depth:
        raise ValueError("context shorter than requested depth")
    return [rf[:l] for l in range(depth + 1)]


def reconstruct_counts(
    forward: Sequence[np.ndarray],
    backward: Sequence[np.ndarray],
    path: Sequence[int],
    i: int,
) -> tuple[np.ndarray, list[bool]]:
    """Recover counting vectors along a suffix path from normalised statistics.

    ``forward[l]`` is g_{i,s_l}, ``backward[j]`` is g<-_{i-1,s_j} and ``path``
    is the most-recent-first context (x_i, x_{i-1}, ...).  Returns the
    (L, A) array ``g_l(a) * prod_{j<l} g<-_j(path[j]) * i`` (unrounded) and a
    per-depth flag telling whether the suffix had been visited.

    The product telescopes to total(s_l)/i, so an unvisited suffix picks up an
    exact zero from the first missing link and the identity stays exact.
    """
    L = len(forward)
    out = np.empty((L, len(forward[0])))
    scale = float(i)
    seen = []
    for l in range(L):
        out[l] = np.asarray(forward[l]) * scale
        seen.append(scale > 0)
        if l + 1 < L:
            scale *= float(backward[l][path[l]])
    return out, seen


def direct_path_counts(table: CountTable, depth: int) -> np.ndarray:
    """(depth+1, A) counts along the current context path, read straight off the table."""
    return np.stack([table.get(s) for s in path_suffixes(table.history, depth)])
