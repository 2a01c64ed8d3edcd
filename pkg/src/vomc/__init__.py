"""Variable-order Markov sources, Bayes-optimal context-tree prediction and
a hand-built transformer that reproduces it exactly."""

from .ctw import CtwState, ctw_predict, ctw_sequence_logprob, ctw_update
from .model import ContextTree, CtwPrior, SourceSequence, generate_sequence, make_rng
from .pathblend import BlendPredictor, blend_predict, blend_weights
from .ppm import PpmModel, PpmPredictor
from .syntf import SyntheticTransformer

__version__ = "0.1.0"

__all__ = [
    "BlendPredictor",
    "ContextTree",
    "CtwPrior",
    "CtwState",
    "PpmModel",
    "PpmPredictor",
    "SourceSequence",
    "SyntheticTransformer",
    "blend_predict",
    "blend_weights",
    "ctw_predict",
    "ctw_sequence_logprob",
    "ctw_update",
    "generate_sequence",
    "make_rng",
]
