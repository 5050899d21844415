"""Sentence-entity encoder: embeddings + indicators, BiLSTM, bilinear attention."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import torch
from torch import nn

from .data import CellSample


@dataclass(frozen=True)
class EncoderSpec:
    """Architecture knobs.

    Embeddings default to frozen random vectors (stand-ins for frozen
    pretrained ones); the recurrent layer uses half the hidden size per
    direction; the output head always has width 4, one logit per change
    kind.
    """

    embedding_dim: int = 100
    hidden_size: int = 100
    freeze_embeddings: bool = True
    num_kinds: int = 4

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EncoderSpec":
        return cls(**json.loads(text))


class CellEncoder(nn.Module):
    """Encodes how one sentence acts on one entity and emits 4 kind logits.

    Each token embedding is extended with two indicator features (refers to
    the entity / is a verb); a BiLSTM contextualizes the sequence; a
    bilinear form against the averaged entity+verb representation yields
    attention weights (softmaxed into a distribution); the attention-pooled
    vector feeds the output head.
    """

    def __init__(self, vocab_size: int, spec: EncoderSpec):
        super().__init__()
        if spec.hidden_size % 2:
            raise ValueError("hidden_size must be even (split across directions)")
        self.spec = spec
        self.embedding = nn.Embedding(vocab_size, spec.embedding_dim)
        if spec.freeze_embeddings:
            self.embedding.weight.requires_grad_(False)
        self.lstm = nn.LSTM(
            spec.embedding_dim + 2,
            spec.hidden_size // 2,
            bidirectional=True,
            batch_first=True,
        )
        self.bilinear = nn.Parameter(torch.empty(spec.hidden_size, 2 * spec.hidden_size))
        self.bias = nn.Parameter(torch.zeros(()))
        nn.init.xavier_uniform_(self.bilinear)
        self.head = nn.Linear(spec.hidden_size, spec.num_kinds)

    def forward(self, sample: CellSample) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (logits[4], attention[L])."""
        tokens = torch.tensor(sample.token_ids, dtype=torch.long)
        ent = torch.tensor(sample.entity_flags).unsqueeze(-1)
        verb = torch.tensor(sample.verb_flags).unsqueeze(-1)
        x = torch.cat([self.embedding(tokens), ent, verb], dim=-1).unsqueeze(0)
        hidden, _ = self.lstm(x)
        hidden = hidden.squeeze(0)  # [L, H]
        h_entity = self._masked_mean(hidden, ent.squeeze(-1))
        h_verb = self._masked_mean(hidden, verb.squeeze(-1))
        h_ev = torch.cat([h_entity, h_verb])  # [2H]
        scores = hidden @ self.bilinear @ h_ev + self.bias  # [L]
        attention = torch.softmax(scores, dim=0)
        context = attention @ hidden  # [H]
        return self.head(context), attention

    @staticmethod
    def _masked_mean(hidden: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        total = mask.sum()
        if total.item() == 0:
            return hidden.new_zeros(hidden.shape[-1])
        return (hidden * mask.unsqueeze(-1)).sum(dim=0) / total

    def log_probs(self, sample: CellSample) -> torch.Tensor:
        logits, _ = self.forward(sample)
        return torch.log_softmax(logits, dim=-1)


class EdgeScoreModel(nn.Module):
    """Scores a candidate dependency edge from its two sentences and kind."""

    def __init__(self, vocab_size: int, spec: EncoderSpec):
        super().__init__()
        self.spec = spec
        self.embedding = nn.Embedding(vocab_size, spec.embedding_dim)
        if spec.freeze_embeddings:
            self.embedding.weight.requires_grad_(False)
        self.lstm = nn.LSTM(
            spec.embedding_dim,
            spec.hidden_size // 2,
            bidirectional=True,
            batch_first=True,
        )
        self.ff = nn.Sequential(
            nn.Linear(2 * spec.hidden_size + spec.num_kinds, 64),
            nn.ReLU(),
            nn.Linear(64, 1),
        )

    def _encode(self, token_ids: tuple[int, ...]) -> torch.Tensor:
        tokens = torch.tensor(token_ids, dtype=torch.long)
        x = self.embedding(tokens).unsqueeze(0)
        hidden, _ = self.lstm(x)
        return hidden.squeeze(0).mean(dim=0)

    def forward(
        self, src_ids: tuple[int, ...], dst_ids: tuple[int, ...], kind_index: int
    ) -> torch.Tensor:
        kind = torch.zeros(self.spec.num_kinds)
        kind[kind_index] = 1.0
        features = torch.cat([self._encode(src_ids), self._encode(dst_ids), kind])
        return torch.sigmoid(self.ff(features)).squeeze(-1)
