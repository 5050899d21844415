"""Encoder training and table export for the procdep decoder."""

from .data import (
    CellSample,
    Process,
    Vocabulary,
    build_vocabulary,
    featurize,
    load_processes,
    mentions,
    next_mention,
    tokenize,
)
from .model import CellEncoder, EdgeScoreModel, EncoderSpec
from .train import (
    TrainConfig,
    TrainedEncoder,
    candidate_edges,
    edge_examples,
    mean_edge_scores,
    train_edge_scorer,
    train_encoder,
)
from .export import export_edge_scores, export_logits

__version__ = "0.1.0"
