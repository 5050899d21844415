"""Pluggable sources of per-cell logits, topic priors, and edge scores.

Provider outputs are normalized log-probabilities over the four change
kinds (exp-sum 1 within 1e-6), not raw scores: keeping the logit term and
the log-prior term of the state-change score on the same scale is what
makes their mixing weight portable across providers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Protocol

from .errors import NormalizationError
from .model import (
    KIND_ORDER,
    ChangeKind,
    Entity,
    ProcessRecord,
    mentions,
    normalize,
    singular,
    tokenize,
)

NORMALIZATION_TOLERANCE = 1e-6
PRIOR_EPSILON = 1e-6
UNIFORM_PRIOR = 0.25
DEFAULT_EDGE_SCORE = 0.5

# Verb lexicons for the rule-based provider and for main-verb extraction.
# These are deliberately small; they are defaults, overridable per provider.
CREATE_VERBS = frozenset({"create", "form", "produce", "make", "generate", "combine"})
MOVE_VERBS = frozenset({"move", "flow", "enter", "absorb", "travel", "carry", "go", "fall", "rise"})
DESTROY_VERBS = frozenset({"destroy", "consume", "break", "burn", "eat", "die", "dissolve"})

_RULE_ORDER: tuple[tuple[ChangeKind, frozenset[str]], ...] = (
    (ChangeKind.CREATE, CREATE_VERBS),
    (ChangeKind.MOVE, MOVE_VERBS),
    (ChangeKind.DESTROY, DESTROY_VERBS),
)


def lemma(token: str) -> str:
    """Naive suffix stripping: -ing, -ed, -s (first that applies)."""
    if len(token) > 4 and token.endswith("ing"):
        return token[:-3]
    if len(token) > 3 and token.endswith("ed"):
        return token[:-2]
    if len(token) > 2 and token.endswith("s"):
        return token[:-1]
    return token


def main_verb(sentence: str, lexicons: Optional[Mapping[ChangeKind, frozenset[str]]] = None) -> str:
    """First token whose lemma appears in any verb lexicon, else the first token."""
    vocab = set()
    if lexicons is None:
        for _, words in _RULE_ORDER:
            vocab |= words
    else:
        for words in lexicons.values():
            vocab |= set(words)
    tokens = tokenize(sentence)
    for tok in tokens:
        if lemma(tok) in vocab:
            return lemma(tok)
    return tokens[0] if tokens else ""


@dataclass(frozen=True)
class LogitsRecord:
    """Normalized log-probabilities over (Create, Move, Destroy, None) for one cell."""

    process_id: str
    step: int
    entity: str
    logp: tuple[float, float, float, float]
    from_loc: Optional[str] = None
    to_loc: Optional[str] = None

    def validate(self) -> None:
        if any(lp > 1e-12 for lp in self.logp):
            raise NormalizationError(
                f"({self.process_id}, {self.step}, {self.entity}): "
                "log-probabilities must be <= 0"
            )
        total = sum(math.exp(lp) for lp in self.logp)
        if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
            raise NormalizationError(
                f"({self.process_id}, {self.step}, {self.entity}): "
                f"probabilities sum to {total:.8f}, expected 1"
            )

    def logprob(self, kind: ChangeKind) -> float:
        return self.logp[kind.rank]

    def argmax(self) -> ChangeKind:
        best = max(range(4), key=lambda i: (self.logp[i], -i))
        return KIND_ORDER[best]


class LogitProvider(Protocol):
    """Contract: deterministic normalized logits for any (process, step, entity)."""

    def logits(self, process: ProcessRecord, step: int, entity: Entity) -> LogitsRecord:
        ...


def _record(
    process: ProcessRecord,
    step: int,
    entity: Entity,
    probs: Mapping[ChangeKind, float],
    from_loc: Optional[str],
    to_loc: Optional[str],
) -> LogitsRecord:
    logp = tuple(math.log(probs[kind]) for kind in KIND_ORDER)
    return LogitsRecord(process.id, step, entity.name, logp, from_loc, to_loc)


def extract_locations(sentence: str) -> tuple[Optional[str], Optional[str]]:
    """Token following "from" -> origin; token following "to"/"into"/"in" -> destination."""
    tokens = tokenize(sentence)
    from_loc = to_loc = None
    for i, tok in enumerate(tokens[:-1]):
        if from_loc is None and tok == "from":
            from_loc = tokens[i + 1]
        if to_loc is None and tok in ("to", "into", "in"):
            to_loc = tokens[i + 1]
    return from_loc, to_loc


@dataclass(frozen=True)
class LexicalLogitProvider:
    """Rule-based logit source: verb-lexicon matches on steps that mention the entity.

    Unmentioned entities get a heavily None-weighted distribution; a fired
    verb rule puts most of the mass on its kind; a mention with no rule
    leaves None ahead but keeps the change kinds competitive.
    """

    rule_hit: float = 0.70
    rule_other: float = 0.10
    unmentioned_none: float = 0.94
    unmentioned_other: float = 0.02
    no_rule_none: float = 0.55
    no_rule_other: float = 0.15
    create_verbs: frozenset[str] = CREATE_VERBS
    move_verbs: frozenset[str] = MOVE_VERBS
    destroy_verbs: frozenset[str] = DESTROY_VERBS

    def _fired_kind(self, sentence: str) -> Optional[ChangeKind]:
        rules = (
            (ChangeKind.CREATE, self.create_verbs),
            (ChangeKind.MOVE, self.move_verbs),
            (ChangeKind.DESTROY, self.destroy_verbs),
        )
        for tok in tokenize(sentence):
            stem = lemma(tok)
            for kind, words in rules:
                if stem in words:
                    return kind
        return None

    def logits(self, process: ProcessRecord, step: int, entity: Entity) -> LogitsRecord:
        sentence = process.sentence(step)
        from_loc, to_loc = extract_locations(sentence)
        if not mentions(sentence, entity):
            probs = {kind: self.unmentioned_other for kind in KIND_ORDER}
            probs[ChangeKind.NONE] = self.unmentioned_none
            return _record(process, step, entity, probs, from_loc, to_loc)
        fired = self._fired_kind(sentence)
        if fired is not None:
            probs = {kind: self.rule_other for kind in KIND_ORDER}
            probs[fired] = self.rule_hit
        else:
            probs = {kind: self.no_rule_other for kind in KIND_ORDER}
            probs[ChangeKind.NONE] = self.no_rule_none
        return _record(process, step, entity, probs, from_loc, to_loc)


def lexical_logits(process: ProcessRecord, step: int, entity: Entity) -> LogitsRecord:
    """Rule-based logits with the default lexicons and constants."""
    return LexicalLogitProvider().logits(process, step, entity)


LogitsKey = tuple[str, int, str]


def logits_key(process_id: str, step: int, entity: str) -> LogitsKey:
    return (process_id, step, normalize(entity))


class FileLogitProvider:
    """Serves stored logits records, falling back to another provider on misses.

    Every miss is recorded in `coverage_warnings` so callers can report
    incomplete logits files.  The warning list is per-instance; parallel
    workers should each own an instance and merge afterwards.
    """

    def __init__(
        self,
        lookup: Mapping[LogitsKey, LogitsRecord],
        fallback: Optional[LogitProvider] = None,
    ):
        self._lookup = dict(lookup)
        self._fallback = fallback if fallback is not None else LexicalLogitProvider()
        self.coverage_warnings: list[LogitsKey] = []

    def logits(self, process: ProcessRecord, step: int, entity: Entity) -> LogitsRecord:
        record = self._lookup.get(logits_key(process.id, step, entity.name))
        if record is not None:
            return record
        self.coverage_warnings.append(logits_key(process.id, step, entity.name))
        return self._fallback.logits(process, step, entity)


def entity_lemma(name: str) -> str:
    """Lookup key for priors and generic edge rows: normalized, plural-stripped if one word."""
    key = normalize(name)
    if " " not in key:
        return singular(key)
    return key


PriorKey = tuple[str, str, ChangeKind]


@dataclass(frozen=True)
class TopicPriorTable:
    """Topic-conditioned prior over change kinds with wildcard backoff.

    Lookup order: (topic, entity) -> ("*", entity) -> (topic, "*") ->
    uniform 1/4.  Probabilities are epsilon-clamped so every log value is
    finite.
    """

    rows: Mapping[PriorKey, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "rows", dict(self.rows))
        for key, p in self.rows.items():
            if not 0.0 < p <= 1.0:
                raise ValueError(f"prior row {key}: probability must be in (0, 1], got {p}")

    def probability(self, topic: str, entity: str, change: ChangeKind) -> float:
        t = normalize(topic)
        e = entity_lemma(entity)
        for key in ((t, e, change), ("*", e, change), (t, "*", change)):
            if key in self.rows:
                return self.rows[key]
        return UNIFORM_PRIOR

    def log_prob(self, topic: str, entity: str, change: ChangeKind) -> float:
        p = self.probability(topic, entity, change)
        return math.log(min(1.0, max(PRIOR_EPSILON, p)))


def prior_logprob(
    table: Optional[TopicPriorTable], topic: str, entity: str, change: ChangeKind
) -> float:
    """Resolve the prior through the backoff chain; None table means uniform."""
    if table is None:
        return math.log(UNIFORM_PRIOR)
    return table.log_prob(topic, entity, change)


@dataclass(frozen=True)
class EdgeCandidate:
    """A dependency edge proposed during decoding, with its sentence context."""

    process_id: str
    src_step: int
    dst_step: int
    entity: str
    kind: ChangeKind
    src_sentence: str = ""
    dst_sentence: str = ""


class EdgeScorer(Protocol):
    """Contract: deterministic prior likelihood in [0, 1] for a candidate edge."""

    def score(self, candidate: EdgeCandidate) -> float:
        ...


@dataclass(frozen=True)
class ConstantEdgeScorer:
    value: float = DEFAULT_EDGE_SCORE

    def score(self, candidate: EdgeCandidate) -> float:
        return self.value


ExactEdgeKey = tuple[str, int, str, ChangeKind]
GenericEdgeKey = tuple[str, ChangeKind, str]


@dataclass(frozen=True)
class EdgeScoreTable:
    """Table-backed edge scorer.

    Lookup chain: exact (process_id, src_step, entity, kind) row, then a
    generic (entity lemma, kind, target-sentence main verb) row, then the
    default score.
    """

    exact: Mapping[ExactEdgeKey, float] = field(default_factory=dict)
    generic: Mapping[GenericEdgeKey, float] = field(default_factory=dict)
    default: float = DEFAULT_EDGE_SCORE

    def __post_init__(self):
        object.__setattr__(self, "exact", dict(self.exact))
        object.__setattr__(self, "generic", dict(self.generic))
        for table in (self.exact, self.generic):
            for key, score in table.items():
                if not 0.0 <= score <= 1.0:
                    raise ValueError(f"edge score row {key}: score must be in [0, 1], got {score}")

    def score(self, candidate: EdgeCandidate) -> float:
        exact_key = (
            candidate.process_id,
            candidate.src_step,
            normalize(candidate.entity),
            candidate.kind,
        )
        if exact_key in self.exact:
            return self.exact[exact_key]
        generic_key = (
            entity_lemma(candidate.entity),
            candidate.kind,
            main_verb(candidate.dst_sentence),
        )
        if generic_key in self.generic:
            return self.generic[generic_key]
        return self.default


def table_edge_score(table: EdgeScoreTable, candidate: EdgeCandidate) -> float:
    return table.score(candidate)
