"""PPM with method-A escapes (escape count 1) and finite memory ``order``.

Contexts are chronological tuples (oldest first), e.g. ``(b, c)`` for
... b, c |-> next symbol, as in the usual PPM count tables.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np


class PpmModel:
    def __init__(self, A: int, order: int):
        if order < 0:
            raise ValueError("PPM order must be >= 0")
        self.A = A
        self.order = order
        # tables[k][context] -> list of successor counts
        self.tables: list[dict[tuple[int, ...], list[int]]] = [{} for _ in range(order + 1)]

    def update(self, context: Sequence[int], symbol: int) -> None:
        """Count ``symbol`` after every suffix of ``context`` up to the model order."""
        if not 0 <= symbol < self.A:
            raise ValueError(f"symbol {symbol} outside [0, {self.A})")
        ctx = tuple(int(x) for x in context)
        for k in range(min(self.order, len(ctx)) + 1):
            key = ctx[len(ctx) - k:]
            row = self.tables[k].get(key)
            if row is None:
                row = self.tables[k][key] = [0] * self.A
            row[symbol] += 1

    def _chain(self, context: Sequence[int]):
        ctx = tuple(int(x) for x in context)
        for k in range(min(self.order, len(ctx)), -1, -1):
            row = self.tables[k].get(ctx[len(ctx) - k:])
            # unseen contexts are skipped without an escape charge
            if row is not None:
                yield row

    def predict(self, context: Sequence[int], symbol: int, exact: bool = False):
        """Effective probability of ``symbol``: escapes down the chain, then the
        count ratio at the first order that has seen it; 1/A at order -1."""
        one = Fraction(1) if exact else 1.0
        prob = one
        for row in self._chain(context):
            total = sum(row)
            if row[symbol]:
                return prob * row[symbol] / (total + 1)
            prob = prob / (total + 1)
        return prob / self.A

    def predict_vector(self, context: Sequence[int]) -> np.ndarray:
        """Per-symbol effective probabilities renormalised to a distribution."""
        raw = self.raw_vector(context)
        return raw / raw.sum()

    def raw_vector(self, context: Sequence[int]) -> np.ndarray:
        return np.array([self.predict(context, a) for a in range(self.A)])

    def table_rows(self) -> dict[int, dict[tuple[int, ...], list[int]]]:
        return {k: {c: list(r) for c, r in t.items()} for k, t in enumerate(self.tables)}


def ppm_predict(model: PpmModel, context: Sequence[int], symbol: int) -> float:
    return model.predict(context, symbol)


def ppm_predict_vector(model: PpmModel, context: Sequence[int]) -> np.ndarray:
    return model.predict_vector(context)


def ppm_update(model: PpmModel, context: Sequence[int], symbol: int) -> PpmModel:
    model.update(context, symbol)
    return model


class PpmPredictor:
    """Sequential wrapper: the padding acts as context only."""

    name = "ppm"

    def __init__(self, A: int, order: int, padding: Sequence[int] = ()):
        self.model = PpmModel(A, order)
        self.history = [int(x) for x in padding]

    def _context(self):
        k = self.model.order
        return self.history[len(self.history) - k:] if k else []

    def predict(self) -> np.ndarray:
        return self.model.predict_vector(self._context())

    def update(self, symbol: int) -> None:
        self.model.update(self._context(), symbol)
        self.history.append(int(symbol))
