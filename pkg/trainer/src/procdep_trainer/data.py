"""Reader for the canonical corpus format plus featurization for training.

This package talks to the decoder only through its file formats, so it
carries its own small reader for the canonical JSON corpus and mirrors the
decoder's tokenization conventions (lowercased alphanumeric tokens, naive
plural stripping, the shared verb lexicons).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional

KINDS = ("Create", "Move", "Destroy", "None")
KIND_TO_INDEX = {k: i for i, k in enumerate(KINDS)}
CELL_CODES = {"C": "Create", "M": "Move", "D": "Destroy", "-": "None"}

CREATE_VERBS = {"create", "form", "produce", "make", "generate", "combine"}
MOVE_VERBS = {"move", "flow", "enter", "absorb", "travel", "carry", "go", "fall", "rise"}
DESTROY_VERBS = {"destroy", "consume", "break", "burn", "eat", "die", "dissolve"}
ALL_VERBS = CREATE_VERBS | MOVE_VERBS | DESTROY_VERBS


def tokenize(text: str) -> list[str]:
    return re.findall(r"[a-z0-9]+", text.lower())


def singular(token: str) -> str:
    if len(token) > 1 and token.endswith("s"):
        return token[:-1]
    return token


def lemma(token: str) -> str:
    if len(token) > 4 and token.endswith("ing"):
        return token[:-3]
    if len(token) > 3 and token.endswith("ed"):
        return token[:-2]
    if len(token) > 2 and token.endswith("s"):
        return token[:-1]
    return token


@dataclass(frozen=True)
class Process:
    id: str
    topic: str
    steps: tuple[str, ...]
    entities: tuple[tuple[str, tuple[str, ...]], ...]  # (name, aliases)
    labels: Optional[tuple[tuple[str, ...], ...]] = None  # [step][entity] kind names
    edges: tuple[tuple[int, int, str, str], ...] = ()  # (src, dst, entity, kind)

    @property
    def entity_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.entities)


def _parse_entity(value) -> tuple[str, tuple[str, ...]]:
    if isinstance(value, dict):
        name = str(value["name"])
        aliases = tuple(str(a) for a in value.get("aliases", ())) or (name,)
        return name, aliases
    parts = [p.strip() for p in str(value).split(";") if p.strip()]
    return parts[0], tuple(parts)


def _cell_kind(cell: str) -> str:
    code = cell.strip()[:1] or "-"
    if code not in CELL_CODES:
        raise ValueError(f"unknown cell code in {cell!r}")
    return CELL_CODES[code]


def load_processes(path: str) -> list[Process]:
    with open(path, encoding="utf-8") as handle:
        doc = json.load(handle)
    processes = []
    for obj in doc["processes"]:
        labels = None
        if obj.get("gold_matrix") is not None:
            labels = tuple(
                tuple(_cell_kind(cell) for cell in row) for row in obj["gold_matrix"]
            )
        edges = tuple(
            (int(e["src"]), int(e["dst"]), str(e["entity"]), _cell_kind(str(e["change"])))
            for e in obj.get("gold_graph") or ()
        )
        processes.append(
            Process(
                id=str(obj["id"]),
                topic=str(obj.get("topic", "")),
                steps=tuple(str(s) for s in obj["steps"]),
                entities=tuple(_parse_entity(e) for e in obj["entities"]),
                labels=labels,
                edges=edges,
            )
        )
    return processes


def mentions(sentence: str, aliases: tuple[str, ...]) -> bool:
    return bool(mention_positions(tokenize(sentence), aliases))


def mention_positions(tokens: list[str], aliases: tuple[str, ...]) -> set[int]:
    """Token positions covered by any alias occurrence (plural-insensitive)."""
    stripped = [singular(t) for t in tokens]
    covered: set[int] = set()
    for alias in aliases:
        needle = [singular(t) for t in tokenize(alias)]
        if not needle or len(needle) > len(stripped):
            continue
        for start in range(len(stripped) - len(needle) + 1):
            if stripped[start:start + len(needle)] == needle:
                covered.update(range(start, start + len(needle)))
    return covered


def next_mention(process: Process, after_step: int, aliases: tuple[str, ...]) -> Optional[int]:
    for j in range(after_step + 1, len(process.steps) + 1):
        if mentions(process.steps[j - 1], aliases):
            return j
    return None


@dataclass
class Vocabulary:
    index: dict[str, int] = field(default_factory=lambda: {"<unk>": 0})

    def add(self, token: str) -> int:
        return self.index.setdefault(token, len(self.index))

    def get(self, token: str) -> int:
        return self.index.get(token, 0)

    def __len__(self) -> int:
        return len(self.index)

    def to_json(self) -> str:
        return json.dumps(self.index, ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        return cls(json.loads(text))


@dataclass(frozen=True)
class CellSample:
    """One (sentence, entity) training/inference item."""

    process_id: str
    step: int
    entity: str
    token_ids: tuple[int, ...]
    entity_flags: tuple[float, ...]
    verb_flags: tuple[float, ...]
    label: Optional[int] = None
    weight: float = 1.0


def build_vocabulary(processes: list[Process]) -> Vocabulary:
    vocab = Vocabulary()
    for process in processes:
        for sentence in process.steps:
            for token in tokenize(sentence):
                vocab.add(token)
    return vocab


def featurize(
    processes: list[Process],
    vocab: Vocabulary,
    require_labels: bool,
    weight: float = 1.0,
) -> list[CellSample]:
    samples = []
    for process in processes:
        if require_labels and process.labels is None:
            raise ValueError(f"process {process.id!r} has no gold matrix")
        for step, sentence in enumerate(process.steps, start=1):
            tokens = tokenize(sentence)
            ids = tuple(vocab.get(t) for t in tokens)
            verb_flags = tuple(1.0 if lemma(t) in ALL_VERBS else 0.0 for t in tokens)
            for pos, (name, aliases) in enumerate(process.entities):
                covered = mention_positions(tokens, aliases)
                entity_flags = tuple(1.0 if i in covered else 0.0 for i in range(len(tokens)))
                label = None
                if process.labels is not None:
                    label = KIND_TO_INDEX[process.labels[step - 1][pos]]
                samples.append(
                    CellSample(
                        process_id=process.id,
                        step=step,
                        entity=name,
                        token_ids=ids,
                        entity_flags=entity_flags,
                        verb_flags=verb_flags,
                        label=label,
                        weight=weight,
                    )
                )
    return samples


def extract_locations(sentence: str) -> tuple[str, str]:
    """Lexical location guesses; "?" when no preposition cue is found."""
    tokens = tokenize(sentence)
    from_loc = to_loc = "?"
    for i, tok in enumerate(tokens[:-1]):
        if from_loc == "?" and tok == "from":
            from_loc = tokens[i + 1]
        if to_loc == "?" and tok in ("to", "into", "in"):
            to_loc = tokens[i + 1]
    return from_loc, to_loc
