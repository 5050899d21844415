"""Constrained beam-search decoding of state-change matrices.

The decoder assigns one change kind per (step, entity) cell, keeping only
assignments consistent with the per-entity existence automaton, and scores
each step's assignment with a weighted mix of:

* a state-change term: provider log-probability blended with a
  topic-conditioned prior, per entity;
* a connectivity term: a bounded bonus/penalty for whether each cell gains
  a dependency edge (the entity is mentioned in a later sentence);
* an edge-prior term: the background likelihood of each edge it adds.

The path score is the sum of per-step scores.  Because the next-mention
table is static and new edges depend only on the current step's
assignments, a matrix's score is independent of the search path, which is
what makes the exhaustive oracle equality exact.

Ties (within 1e-9) are broken by comparing the flattened assignment
encoding (Create=0, Move=1, Destroy=2, None=3; earlier steps first,
entities in declared order); the smaller tuple wins.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import ConfigError, TooLarge
from .graphs import DeriveMode, NextMentionTable, derive_graph, incremental_targets
from .model import (
    KIND_ORDER,
    ChangeKind,
    DependencyGraph,
    ExistenceState,
    ProcessRecord,
    StateChange,
    StateChangeMatrix,
    allowed_changes,
    apply_change,
)
from .providers import (
    ConstantEdgeScorer,
    EdgeCandidate,
    EdgeScorer,
    LogitProvider,
    LogitsRecord,
    TopicPriorTable,
    prior_logprob,
)

SCORE_TIE_TOLERANCE = 1e-9

Assignment = tuple[ChangeKind, ...]


@dataclass(frozen=True)
class DecoderConfig:
    """Hyperparameters of the dependency-aware decoder.

    state_weight trades the state-change term against the graph terms;
    logit_weight trades provider logits against the topic prior inside the
    state-change term; connectivity_weight trades connectivity against the
    edge prior inside the graph term; purpose_bonus is the reward/penalty
    magnitude for gaining/fumbling an edge (must stay below 1 so
    log(1 - bonus) is finite).
    """

    state_weight: float = 0.5
    logit_weight: float = 0.8
    connectivity_weight: float = 0.8
    purpose_bonus: float = 0.5
    beam_width: int = 20
    candidate_cap: int = 128

    def validate(self) -> None:
        for name in ("state_weight", "logit_weight", "connectivity_weight"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {value}")
        if not 0.0 < self.purpose_bonus < 1.0:
            raise ConfigError(f"purpose_bonus must be in (0, 1), got {self.purpose_bonus}")
        if self.beam_width < 1:
            raise ConfigError(f"beam_width must be positive, got {self.beam_width}")
        if self.candidate_cap < 1:
            raise ConfigError(f"candidate_cap must be positive, got {self.candidate_cap}")


@dataclass(frozen=True)
class BeamEntry:
    """One partial decoding: assignments up to step t plus derived state."""

    assignments: tuple[Assignment, ...]
    existence: tuple[ExistenceState, ...]
    score: float
    edges: tuple[EdgeCandidate, ...] = ()

    @property
    def encoding(self) -> tuple[int, ...]:
        return tuple(kind.rank for row in self.assignments for kind in row)


@dataclass(frozen=True)
class DecodeResult:
    matrix: StateChangeMatrix
    graph: DependencyGraph
    score: float
    use_connectivity: bool = True
    use_edge_prior: bool = True


def state_change_score(
    records: Sequence[LogitsRecord],
    priors: Optional[TopicPriorTable],
    topic: str,
    assignment: Assignment,
    logit_weight: float,
) -> float:
    """Per-step state-change term: sum over entities of the blended log-likelihood."""
    total = 0.0
    for rec, kind in zip(records, assignment):
        total += logit_weight * rec.logprob(kind) + (1.0 - logit_weight) * prior_logprob(
            priors, topic, rec.entity, kind
        )
    return total


def purpose_score(kind: ChangeKind, mentioned_later: bool, bonus: float) -> float:
    """+bonus when the cell gains an edge, -bonus when it forgoes one, else 0."""
    if not mentioned_later:
        return 0.0
    return bonus if kind is not ChangeKind.NONE else -bonus


def connectivity_score(
    assignment: Assignment, mentioned_later: Sequence[bool], bonus: float
) -> float:
    """Sum over entities of log(1 + purpose score)."""
    return sum(
        math.log1p(purpose_score(kind, flag, bonus))
        for kind, flag in zip(assignment, mentioned_later)
    )


def edge_prior_score(new_edges: Sequence[EdgeCandidate], scorer: EdgeScorer) -> float:
    """Sum over the step's new edges of log(1 + edge score)."""
    return sum(math.log1p(scorer.score(edge)) for edge in new_edges)


def step_score(
    state_term: float,
    connectivity_term: float,
    edge_prior_term: float,
    state_weight: float,
    connectivity_weight: float,
) -> float:
    """Blend the three per-step terms with the configured weights."""
    graph_term = (
        connectivity_weight * connectivity_term
        + (1.0 - connectivity_weight) * edge_prior_term
    )
    return state_weight * state_term + (1.0 - state_weight) * graph_term


class _StepScorer:
    """Precomputes everything a decode needs per (step, assignment).

    Per-step scores are cached, so repeated assignments across beam entries
    cost one dict hit, and beam search and the exhaustive oracle share the
    exact same floating-point values.
    """

    def __init__(
        self,
        process: ProcessRecord,
        provider: LogitProvider,
        priors: Optional[TopicPriorTable],
        edge_scorer: Optional[EdgeScorer],
        config: DecoderConfig,
        use_connectivity: bool = True,
        use_edge_prior: bool = True,
    ):
        self.process = process
        self.config = config
        self.use_connectivity = use_connectivity
        self.use_edge_prior = use_edge_prior
        self.edge_scorer = edge_scorer if edge_scorer is not None else ConstantEdgeScorer()
        self.table: NextMentionTable = incremental_targets(process)
        self.records: dict[int, tuple[LogitsRecord, ...]] = {}
        self.cell_terms: dict[int, tuple[tuple[float, float, float, float], ...]] = {}
        for t in range(1, process.num_steps + 1):
            recs = tuple(
                provider.logits(process, t, entity) for entity in process.entities
            )
            self.records[t] = recs
            self.cell_terms[t] = tuple(
                tuple(
                    config.logit_weight * rec.logprob(kind)
                    + (1.0 - config.logit_weight)
                    * prior_logprob(priors, process.topic, rec.entity, kind)
                    for kind in KIND_ORDER
                )
                for rec in recs
            )
        self._phi_cache: dict[tuple[int, Assignment], tuple[float, tuple[EdgeCandidate, ...]]] = {}

    def state_term(self, step: int, assignment: Assignment) -> float:
        terms = self.cell_terms[step]
        return sum(terms[j][kind.rank] for j, kind in enumerate(assignment))

    def new_edges(self, step: int, assignment: Assignment) -> tuple[EdgeCandidate, ...]:
        edges = []
        for pos, kind in enumerate(assignment, start=1):
            if kind is ChangeKind.NONE:
                continue
            target = self.table.target(step, pos)
            if target is None:
                continue
            entity = self.process.entities[pos - 1]
            edges.append(
                EdgeCandidate(
                    process_id=self.process.id,
                    src_step=step,
                    dst_step=target,
                    entity=entity.name,
                    kind=kind,
                    src_sentence=self.process.sentence(step),
                    dst_sentence=self.process.sentence(target),
                )
            )
        return tuple(edges)

    def phi(self, step: int, assignment: Assignment) -> tuple[float, tuple[EdgeCandidate, ...]]:
        cached = self._phi_cache.get((step, assignment))
        if cached is not None:
            return cached
        edges = self.new_edges(step, assignment)
        mentioned = tuple(
            self.table.target(step, pos) is not None
            for pos in range(1, self.process.num_entities + 1)
        )
        conn = (
            connectivity_score(assignment, mentioned, self.config.purpose_bonus)
            if self.use_connectivity
            else 0.0
        )
        prior = edge_prior_score(edges, self.edge_scorer) if self.use_edge_prior else 0.0
        value = step_score(
            self.state_term(step, assignment),
            conn,
            prior,
            self.config.state_weight,
            self.config.connectivity_weight,
        )
        result = (value, edges)
        self._phi_cache[(step, assignment)] = result
        return result

    def candidates(
        self, step: int, existence: tuple[ExistenceState, ...], cap: Optional[int] = None
    ) -> list[Assignment]:
        """Consistent assignment vectors, best-first by the state-change term."""
        allowed = [allowed_changes(state) for state in existence]
        options = list(itertools.product(*allowed))
        terms = self.cell_terms[step]
        options.sort(
            key=lambda a: (
                -sum(terms[j][kind.rank] for j, kind in enumerate(a)),
                tuple(kind.rank for kind in a),
            )
        )
        if cap is not None:
            options = options[:cap]
        return options


def step_candidates(
    process: ProcessRecord,
    step: int,
    entry: BeamEntry,
    provider: LogitProvider,
    config: DecoderConfig,
    priors: Optional[TopicPriorTable] = None,
) -> list[Assignment]:
    """Consistent assignment vectors for one step, capped and best-first.

    Filtering against the entry's existence vector guarantees every result
    extends the prefix consistently; the all-None vector is always legal,
    so the list is never empty.
    """
    config.validate()
    scorer = _StepScorer(process, provider, priors, None, config)
    return scorer.candidates(step, entry.existence, config.candidate_cap)


def initial_entry(process: ProcessRecord) -> BeamEntry:
    return BeamEntry(
        assignments=(),
        existence=tuple(ExistenceState.UNKNOWN for _ in process.entities),
        score=0.0,
    )


def _advance(existence: tuple[ExistenceState, ...], assignment: Assignment) -> tuple[ExistenceState, ...]:
    return tuple(apply_change(s, k) for s, k in zip(existence, assignment))


def _best_entry(entries: Sequence[BeamEntry]) -> BeamEntry:
    """Argmax with the tie tolerance and the encoding tie-break."""
    best = entries[0]
    best_enc = best.encoding
    for entry in entries[1:]:
        enc = entry.encoding
        if entry.score > best.score + SCORE_TIE_TOLERANCE or (
            abs(entry.score - best.score) <= SCORE_TIE_TOLERANCE and enc < best_enc
        ):
            best, best_enc = entry, enc
    return best


def _assemble(
    process: ProcessRecord, scorer: _StepScorer, entry: BeamEntry,
    use_connectivity: bool, use_edge_prior: bool,
) -> DecodeResult:
    rows = []
    for t, assignment in enumerate(entry.assignments, start=1):
        recs = scorer.records[t]
        row = []
        for rec, kind in zip(recs, assignment):
            if kind is ChangeKind.NONE:
                row.append(StateChange(ChangeKind.NONE))
            elif kind is ChangeKind.CREATE:
                row.append(StateChange(kind, None, rec.to_loc))
            elif kind is ChangeKind.DESTROY:
                row.append(StateChange(kind, rec.from_loc, None))
            else:
                row.append(StateChange(kind, rec.from_loc, rec.to_loc))
        rows.append(tuple(row))
    matrix = StateChangeMatrix.from_rows(rows)
    graph = derive_graph(process, matrix, DeriveMode.MENTION_OR_CHANGE)
    return DecodeResult(matrix, graph, entry.score, use_connectivity, use_edge_prior)


def decode(
    process: ProcessRecord,
    provider: LogitProvider,
    priors: Optional[TopicPriorTable] = None,
    edge_scorer: Optional[EdgeScorer] = None,
    config: DecoderConfig = DecoderConfig(),
    *,
    use_connectivity: bool = True,
    use_edge_prior: bool = True,
) -> DecodeResult:
    """Beam-search the best consistent matrix and its dependency graph.

    One step at a time, every beam entry is expanded with its capped,
    consistency-filtered candidate assignments; entries are ranked by
    accumulated score and pruned to the beam width.  The final graph is
    recomputed from the winning matrix with the full mention-or-change
    rule.
    """
    config.validate()
    scorer = _StepScorer(
        process, provider, priors, edge_scorer, config, use_connectivity, use_edge_prior
    )
    beam = [initial_entry(process)]
    for t in range(1, process.num_steps + 1):
        successors: list[BeamEntry] = []
        for entry in beam:
            for assignment in scorer.candidates(t, entry.existence, config.candidate_cap):
                value, edges = scorer.phi(t, assignment)
                successors.append(
                    BeamEntry(
                        assignments=entry.assignments + (assignment,),
                        existence=_advance(entry.existence, assignment),
                        score=entry.score + value,
                        edges=entry.edges + edges,
                    )
                )
        successors.sort(key=lambda e: (-e.score, e.encoding))
        beam = successors[: config.beam_width]
    winner = _best_entry(beam)
    return _assemble(process, scorer, winner, use_connectivity, use_edge_prior)


def score_matrix(
    process: ProcessRecord,
    matrix: StateChangeMatrix,
    provider: LogitProvider,
    priors: Optional[TopicPriorTable] = None,
    edge_scorer: Optional[EdgeScorer] = None,
    config: DecoderConfig = DecoderConfig(),
    *,
    use_connectivity: bool = True,
    use_edge_prior: bool = True,
) -> float:
    """Total path score of a full matrix under the same term definitions as decode."""
    config.validate()
    scorer = _StepScorer(
        process, provider, priors, edge_scorer, config, use_connectivity, use_edge_prior
    )
    total = 0.0
    for t in range(1, process.num_steps + 1):
        assignment = tuple(cell.kind for cell in matrix.row(t))
        value, _ = scorer.phi(t, assignment)
        total += value
    return total


EXHAUSTIVE_CELL_LIMIT = 9


def exhaustive_decode(
    process: ProcessRecord,
    provider: LogitProvider,
    priors: Optional[TopicPriorTable] = None,
    edge_scorer: Optional[EdgeScorer] = None,
    config: DecoderConfig = DecoderConfig(),
    *,
    use_connectivity: bool = True,
    use_edge_prior: bool = True,
) -> DecodeResult:
    """Score every consistent matrix and return the argmax (desk-scale oracle).

    Refuses instances with more than 9 cells.  Uses the same cached
    per-step scores and the same tie-break as decode, accumulated in the
    same step order, so agreement with a wide-beam decode is exact.
    """
    config.validate()
    cells = process.num_steps * process.num_entities
    if cells > EXHAUSTIVE_CELL_LIMIT:
        raise TooLarge(
            f"{process.num_steps}x{process.num_entities} = {cells} cells exceeds "
            f"the exhaustive limit of {EXHAUSTIVE_CELL_LIMIT}"
        )
    scorer = _StepScorer(
        process, provider, priors, edge_scorer, config, use_connectivity, use_edge_prior
    )
    finals: list[BeamEntry] = []
    stack = [initial_entry(process)]
    while stack:
        entry = stack.pop()
        t = len(entry.assignments) + 1
        for assignment in scorer.candidates(t, entry.existence):
            value, edges = scorer.phi(t, assignment)
            successor = BeamEntry(
                assignments=entry.assignments + (assignment,),
                existence=_advance(entry.existence, assignment),
                score=entry.score + value,
                edges=entry.edges + edges,
            )
            if t == process.num_steps:
                finals.append(successor)
            else:
                stack.append(successor)
    winner = _best_entry(finals)
    return _assemble(process, scorer, winner, use_connectivity, use_edge_prior)
