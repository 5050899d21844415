"""Exporters emitting the decoder's logits TSV and edge-score TSV formats."""

from __future__ import annotations

import os
from typing import Optional

import torch

from .data import Process, Vocabulary, extract_locations, featurize
from .model import EdgeScoreModel
from .train import TrainedEncoder, candidate_edges
from .data import KIND_TO_INDEX, tokenize

LOGITS_HEADER = "process_id\tstep\tentity\tlp_create\tlp_move\tlp_destroy\tlp_none\tfrom\tto"


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    tmp = os.path.join(directory, f".{os.path.basename(path)}.tmp")
    with open(tmp, "w", encoding="utf-8") as handle:
        handle.write(text)
    os.replace(tmp, path)


def export_logits(
    trained: TrainedEncoder,
    processes: list[Process],
    path: str,
    locations: str = "none",
) -> int:
    """Write one normalized row per (process, step, entity); returns the row count.

    locations="lexical" fills from/to with the preposition-cue guesses;
    "none" leaves them as "?".
    """
    if locations not in ("none", "lexical"):
        raise ValueError("locations must be 'none' or 'lexical'")
    samples = featurize(processes, trained.vocab, require_labels=False)
    rows = [LOGITS_HEADER]
    with torch.no_grad():
        for sample in samples:
            logp = trained.model.log_probs(sample).tolist()
            if locations == "lexical":
                from_loc, to_loc = extract_locations(
                    next(
                        p.steps[sample.step - 1]
                        for p in processes
                        if p.id == sample.process_id
                    )
                )
            else:
                from_loc = to_loc = "?"
            rows.append(
                "\t".join(
                    [
                        sample.process_id,
                        str(sample.step),
                        sample.entity,
                        *(repr(v) for v in logp),
                        from_loc,
                        to_loc,
                    ]
                )
            )
    _atomic_write(path, "\n".join(rows) + "\n")
    return len(rows) - 1


def export_edge_scores(
    model: Optional[EdgeScoreModel],
    vocab: Optional[Vocabulary],
    processes: list[Process],
    path: str,
    default_score: float = 0.5,
) -> int:
    """Write exact-key edge rows for every mention-target candidate.

    With no model, every candidate gets the default score.  Returns the row
    count.
    """
    rows = ["[exact]", "process_id\tsrc_step\tentity\tchange\tscore"]
    count = 0
    with torch.no_grad():
        for process in processes:
            for src, dst, entity, kind in candidate_edges(process):
                if model is None:
                    score = default_score
                else:
                    assert vocab is not None
                    src_ids = tuple(vocab.get(t) for t in tokenize(process.steps[src - 1]))
                    dst_ids = tuple(vocab.get(t) for t in tokenize(process.steps[dst - 1]))
                    score = float(model(src_ids, dst_ids, KIND_TO_INDEX[kind]).item())
                rows.append(f"{process.id}\t{src}\t{entity}\t{kind}\t{score:.6f}")
                count += 1
    _atomic_write(path, "\n".join(rows) + "\n")
    return count
