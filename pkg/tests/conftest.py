import math
import os
import random

import pytest

from procdep import (
    CorpusFile,
    Entity,
    FileLogitProvider,
    LogitsRecord,
    ProcessRecord,
    TopicPriorTable,
    load_corpus,
    load_edge_table,
    load_logits,
)
from procdep.model import KIND_ORDER
from procdep.providers import logits_key

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def data_path(name: str) -> str:
    return os.path.join(DATA_DIR, name)


@pytest.fixture(scope="session")
def micro_corpus() -> CorpusFile:
    return load_corpus(data_path("micro.json"))


@pytest.fixture(scope="session")
def photosynthesis(micro_corpus) -> ProcessRecord:
    return micro_corpus.by_id()["photosynthesis-1"]


@pytest.fixture(scope="session")
def water_cycle_tied(micro_corpus) -> ProcessRecord:
    return micro_corpus.by_id()["water-cycle-tied"]


@pytest.fixture(scope="session")
def water_cycle_near(micro_corpus) -> ProcessRecord:
    return micro_corpus.by_id()["water-cycle-near"]


@pytest.fixture(scope="session")
def water_logits():
    return load_logits(data_path("water_cycle_logits.tsv"))


@pytest.fixture(scope="session")
def edge_table():
    return load_edge_table(data_path("edge_scores.tsv"))


# ---------------------------------------------------------------------------
# Random instance generators for fuzz and oracle tests

_NAMES = ("water", "rock", "gas", "sand", "ice", "salt", "steam", "mud")
_FILLER = ("the", "then", "heat", "slowly", "ground", "begins", "nearby", "later")


def make_random_process(rng: random.Random, num_steps: int, num_entities: int) -> ProcessRecord:
    names = rng.sample(_NAMES, num_entities)
    steps = []
    for _ in range(num_steps):
        words = [rng.choice(_FILLER) for _ in range(rng.randint(2, 5))]
        for name in names:
            if rng.random() < 0.5:
                words.insert(rng.randrange(len(words) + 1), name)
        steps.append(" ".join(words).capitalize() + ".")
    return ProcessRecord(
        id=f"rand-{rng.randrange(10**9)}",
        topic=rng.choice(("geology", "weather", "chemistry")),
        steps=tuple(steps),
        entities=tuple(Entity(name) for name in names),
    )


def make_random_provider(rng: random.Random, process: ProcessRecord) -> FileLogitProvider:
    """Full-coverage provider with random normalized logits per cell."""
    lookup = {}
    for step in range(1, process.num_steps + 1):
        for entity in process.entities:
            weights = [rng.random() + 0.05 for _ in range(4)]
            total = sum(weights)
            logp = tuple(math.log(w / total) for w in weights)
            record = LogitsRecord(
                process.id,
                step,
                entity.name,
                logp,
                from_loc=rng.choice((None, "here", "?")),
                to_loc=rng.choice((None, "there", "?")),
            )
            lookup[logits_key(process.id, step, entity.name)] = record
    return FileLogitProvider(lookup)


def make_random_priors(rng: random.Random, process: ProcessRecord) -> TopicPriorTable:
    rows = {}
    for entity in process.entities:
        for kind in KIND_ORDER:
            if rng.random() < 0.6:
                rows[(process.topic.lower(), entity.key, kind)] = rng.uniform(0.05, 1.0)
    return TopicPriorTable(rows)
