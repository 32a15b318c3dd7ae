"""Byte-level neural LM server speaking the lmviterbi wire protocol."""

from .correct import Corrector
from .model import ByteLm, build_t5
from .server import BridgeServer, BridgeState
from .similarity import NgramEmbedder, SimilarityScorer
from .train import finetune_lm, load_pairs, load_sentences, perplexity, \
    train_correction

__version__ = "0.1.0"
