"""Transition-based dependency parsing with semi-supervised data selection."""
from .corpus import Sentence, Token, read_conll, save_conll, write_conll
from .decoder import DecodeConstraint, beam_search, decode, decode_corpus
from .model import WeightModel, train
from .transitions import ARC_EAGER, ARC_STANDARD, Transition, oracle_sequence

__version__ = "0.1.0"

__all__ = [
    "ARC_EAGER", "ARC_STANDARD", "DecodeConstraint", "Sentence", "Token", "Transition", "WeightModel",
    "beam_search", "decode", "decode_corpus", "oracle_sequence", "read_conll", "save_conll", "train",
    "write_conll",
]
