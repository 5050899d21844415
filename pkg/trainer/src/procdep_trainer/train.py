"""Training loops for the cell encoder and the edge scorer."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Optional

import torch
from torch import nn

from .data import (
    KIND_TO_INDEX,
    CellSample,
    Process,
    Vocabulary,
    build_vocabulary,
    featurize,
    next_mention,
    tokenize,
)
from .model import CellEncoder, EdgeScoreModel, EncoderSpec


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 0.2
    seed: int = 13
    dev_fraction: float = 0.0
    aux_weight: float = 1.0  # loss multiplier for the main corpus vs auxiliary data

    def validate(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if not 0.0 <= self.dev_fraction < 1.0:
            raise ValueError("dev_fraction must be in [0, 1)")


@dataclass
class TrainedEncoder:
    model: CellEncoder
    vocab: Vocabulary
    spec: EncoderSpec
    metrics_log: list[str]


def _seed_everything(seed: int) -> None:
    random.seed(seed)
    torch.manual_seed(seed)
    torch.set_num_threads(1)


def _accuracy(model: CellEncoder, samples: list[CellSample]) -> float:
    if not samples:
        return float("nan")
    correct = 0
    with torch.no_grad():
        for sample in samples:
            logits, _ = model(sample)
            correct += int(logits.argmax().item() == sample.label)
    return correct / len(samples)


def train_encoder(
    processes: list[Process],
    spec: EncoderSpec = EncoderSpec(),
    config: TrainConfig = TrainConfig(),
    aux_processes: Optional[list[Process]] = None,
) -> TrainedEncoder:
    """Minimize per-cell cross-entropy; deterministic under a fixed seed.

    Auxiliary processes (if any) contribute samples at weight 1 while main
    corpus samples carry `aux_weight`, so errors on the main corpus can be
    penalized more heavily.
    """
    config.validate()
    labelled = [p for p in processes if p.labels is not None]
    if not labelled:
        raise ValueError("training requires gold matrices")
    _seed_everything(config.seed)
    vocab = build_vocabulary(labelled + list(aux_processes or ()))
    dev_count = int(len(labelled) * config.dev_fraction)
    dev_processes = labelled[len(labelled) - dev_count:] if dev_count else []
    train_processes = labelled[: len(labelled) - dev_count]
    train_samples = featurize(train_processes, vocab, require_labels=True,
                              weight=config.aux_weight)
    if aux_processes:
        train_samples += featurize(
            [p for p in aux_processes if p.labels is not None],
            vocab, require_labels=True, weight=1.0,
        )
    dev_samples = featurize(dev_processes, vocab, require_labels=True) if dev_processes else []

    model = CellEncoder(len(vocab), spec)
    optimizer = torch.optim.Adadelta(
        [p for p in model.parameters() if p.requires_grad], lr=config.learning_rate
    )
    loss_fn = nn.CrossEntropyLoss(reduction="none")
    log: list[str] = ["epoch\tloss\ttrain_acc\tdev_acc"]
    for epoch in range(1, config.epochs + 1):
        model.train()
        total_loss = 0.0
        for sample in train_samples:
            optimizer.zero_grad()
            logits, _ = model(sample)
            target = torch.tensor([sample.label], dtype=torch.long)
            loss = (loss_fn(logits.unsqueeze(0), target) * sample.weight).sum()
            loss.backward()
            optimizer.step()
            total_loss += loss.item()
        model.eval()
        train_acc = _accuracy(model, train_samples)
        dev_acc = _accuracy(model, dev_samples) if dev_samples else None
        dev_text = f"{dev_acc:.4f}" if dev_acc is not None else "na"
        log.append(f"{epoch}\t{total_loss:.6f}\t{train_acc:.4f}\t{dev_text}")
    model.eval()
    return TrainedEncoder(model, vocab, spec, log)


# ---------------------------------------------------------------------------
# Edge scorer


EdgeExample = tuple[tuple[int, ...], tuple[int, ...], int, float]


def edge_examples(
    processes: list[Process], vocab: Vocabulary
) -> tuple[list[EdgeExample], list[EdgeExample]]:
    """Positives from gold edges; negatives by reversing them."""
    positives, negatives = [], []
    for process in processes:
        for src, dst, _entity, kind in process.edges:
            src_ids = tuple(vocab.get(t) for t in tokenize(process.steps[src - 1]))
            dst_ids = tuple(vocab.get(t) for t in tokenize(process.steps[dst - 1]))
            kind_index = KIND_TO_INDEX[kind]
            positives.append((src_ids, dst_ids, kind_index, 1.0))
            negatives.append((dst_ids, src_ids, kind_index, 0.0))
    return positives, negatives


def train_edge_scorer(
    processes: list[Process],
    vocab: Vocabulary,
    spec: EncoderSpec = EncoderSpec(),
    config: TrainConfig = TrainConfig(epochs=60),
) -> EdgeScoreModel:
    """Binary classifier over gold vs reversed edges; deterministic under the seed."""
    config.validate()
    _seed_everything(config.seed + 1)
    model = EdgeScoreModel(len(vocab), spec)
    positives, negatives = edge_examples(processes, vocab)
    examples = positives + negatives
    if not examples:
        raise ValueError("edge training requires gold graphs with at least one edge")
    optimizer = torch.optim.Adadelta(
        [p for p in model.parameters() if p.requires_grad], lr=config.learning_rate
    )
    loss_fn = nn.BCELoss()
    for _ in range(config.epochs):
        for src_ids, dst_ids, kind_index, target in examples:
            optimizer.zero_grad()
            score = model(src_ids, dst_ids, kind_index)
            loss = loss_fn(score, torch.tensor(target))
            loss.backward()
            optimizer.step()
    model.eval()
    return model


def mean_edge_scores(
    model: EdgeScoreModel, examples: list[EdgeExample]
) -> float:
    if not examples:
        return math.nan
    with torch.no_grad():
        return sum(
            model(src, dst, kind).item() for src, dst, kind, _ in examples
        ) / len(examples)


def candidate_edges(process: Process) -> list[tuple[int, int, str, str]]:
    """All (src, next-mention target, entity, kind) candidates, kinds = C/M/D."""
    out = []
    for step in range(1, len(process.steps) + 1):
        for name, aliases in process.entities:
            target = next_mention(process, step, aliases)
            if target is None:
                continue
            for kind in ("Create", "Move", "Destroy"):
                out.append((step, target, name, kind))
    return out
