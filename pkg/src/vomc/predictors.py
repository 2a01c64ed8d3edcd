"""Sequential predictors sharing one tiny interface: ``predict()`` returns the
law of the next symbol, ``update(x)`` absorbs it.  ``observe(x)`` does both and
returns the log-loss in nats."""

from __future__ import annotations

import math
from typing import Protocol, Sequence

import numpy as np

from .ctw import CtwState
from .model import ContextTree, CtwPrior
from .pathblend import BlendPredictor
from .ppm import PpmPredictor


class Predictor(Protocol):
    name: str

    def predict(self) -> np.ndarray: ...

    def update(self, symbol: int) -> None: ...


def observe(pred, symbol: int) -> float:
    fast = getattr(pred, "observe", None)
    if fast is not None:
        return fast(symbol)
    p = pred.predict()[symbol]
    pred.update(symbol)
    return -math.log(p) if p > 0 else math.inf


class UniformPredictor:
    name = "uniform"

    def __init__(self, A: int):
        self.A = A

    def predict(self) -> np.ndarray:
        return np.full(self.A, 1.0 / self.A)

    def update(self, symbol: int) -> None:
        pass


class CtwPredictor:
    name = "ctw"

    def __init__(self, prior: CtwPrior, padding: Sequence[int]):
        self.state = CtwState(prior, padding)

    def predict(self) -> np.ndarray:
        return self.state.predict()

    def update(self, symbol: int) -> None:
        self.state.update(symbol)

    def observe(self, symbol: int) -> float:
        # ratio of root weighted evidences; no need to build the full vector
        return -self.state.update(symbol)


class GeniePredictor:
    """The generating tree itself (genie / entropy-rate floor)."""

    name = "genie"

    def __init__(self, tree: ContextTree, padding: Sequence[int]):
        self.tree = tree
        self.probs = tree.prob_matrix()
        self.A, self.D = tree.A, tree.depth
        self.code = 0
        for x in list(padding)[len(padding) - self.D:] if self.D else []:
            self.code = (self.code * self.A + int(x)) % (self.A ** self.D)

    def predict(self) -> np.ndarray:
        return self.probs[self.tree.leaf_index(self.code)].copy()

    def update(self, symbol: int) -> None:
        if self.D:
            self.code = (self.code * self.A + int(symbol)) % (self.A ** self.D)


# registry used by the container format
PREDICTOR_IDS = {"uniform": 0, "ctw": 1, "blend": 2, "ppm": 3}
PREDICTOR_NAMES = {v: k for k, v in PREDICTOR_IDS.items()}


def make_predictor(name: str, prior: CtwPrior, padding: Sequence[int], ppm_order: int | None = None):
    if name == "uniform":
        return UniformPredictor(prior.A)
    if name == "ctw":
        return CtwPredictor(prior, padding)
    if name == "blend":
        return BlendPredictor(prior, padding)
    if name == "ppm":
        return PpmPredictor(prior.A, prior.depth if ppm_order is None else ppm_order, padding)
    raise ValueError(f"unknown predictor {name!r}")
