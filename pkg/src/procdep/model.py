"""Core domain types for procedural-text processes.

A process is an ordered sequence of step sentences plus the participant
entities whose states those steps change.  Each (step, entity) cell of the
state-change matrix holds one of Create/Move/Destroy/None; a per-entity
existence automaton (Unknown/Exists/Destroyed) defines which change
sequences are consistent.  Step and entity positions are 1-based
throughout.  All types are immutable after construction and all operations
are pure.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterable, Optional, Sequence

from .errors import DimensionMismatch, InconsistentTransition, ValidationError


class ChangeKind(Enum):
    CREATE = "Create"
    MOVE = "Move"
    DESTROY = "Destroy"
    NONE = "None"

    @property
    def code(self) -> str:
        """One-letter grid cell code."""
        return _KIND_CODE[self]

    @property
    def rank(self) -> int:
        """Tie-break encoding: Create=0, Move=1, Destroy=2, None=3."""
        return _KIND_RANK[self]

    @classmethod
    def from_name(cls, name: str) -> "ChangeKind":
        key = name.strip().lower()
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        raise ValueError(f"unknown state change kind: {name!r}")


#: Fixed kind order used for logit vectors and file columns.
KIND_ORDER: tuple[ChangeKind, ...] = (
    ChangeKind.CREATE,
    ChangeKind.MOVE,
    ChangeKind.DESTROY,
    ChangeKind.NONE,
)

_KIND_CODE = {
    ChangeKind.CREATE: "C",
    ChangeKind.MOVE: "M",
    ChangeKind.DESTROY: "D",
    ChangeKind.NONE: "-",
}
_KIND_RANK = {kind: i for i, kind in enumerate(KIND_ORDER)}


class ExistenceState(Enum):
    UNKNOWN = "Unknown"
    EXISTS = "Exists"
    DESTROYED = "Destroyed"


# Existence automaton.  Unknown is the initial state so entities that exist
# before the process starts may Move or Destroy without a prior Create.
# Missing keys are the inconsistent transitions.
_TRANSITIONS: dict[tuple[ExistenceState, ChangeKind], ExistenceState] = {
    (ExistenceState.UNKNOWN, ChangeKind.CREATE): ExistenceState.EXISTS,
    (ExistenceState.UNKNOWN, ChangeKind.MOVE): ExistenceState.EXISTS,
    (ExistenceState.UNKNOWN, ChangeKind.DESTROY): ExistenceState.DESTROYED,
    (ExistenceState.UNKNOWN, ChangeKind.NONE): ExistenceState.UNKNOWN,
    (ExistenceState.EXISTS, ChangeKind.MOVE): ExistenceState.EXISTS,
    (ExistenceState.EXISTS, ChangeKind.DESTROY): ExistenceState.DESTROYED,
    (ExistenceState.EXISTS, ChangeKind.NONE): ExistenceState.EXISTS,
    (ExistenceState.DESTROYED, ChangeKind.CREATE): ExistenceState.EXISTS,
    (ExistenceState.DESTROYED, ChangeKind.NONE): ExistenceState.DESTROYED,
}


def apply_change(state: ExistenceState, change: ChangeKind) -> ExistenceState:
    """Advance the existence automaton; raise InconsistentTransition on invalid cells."""
    nxt = _TRANSITIONS.get((state, change))
    if nxt is None:
        raise InconsistentTransition(state, change)
    return nxt


def allowed_changes(state: ExistenceState) -> tuple[ChangeKind, ...]:
    """Kinds applicable in `state`, in the fixed kind order."""
    return tuple(k for k in KIND_ORDER if (state, k) in _TRANSITIONS)


def normalize(text: str) -> str:
    return text.strip().lower()


@lru_cache(maxsize=65536)
def tokenize(text: str) -> tuple[str, ...]:
    """Lowercased tokens split on non-alphanumeric boundaries."""
    return tuple(re.findall(r"[a-z0-9]+", text.lower()))


def singular(token: str) -> str:
    """Naive plural stripping: drop one trailing 's' (never below one char)."""
    if len(token) > 1 and token.endswith("s"):
        return token[:-1]
    return token


@dataclass(frozen=True)
class Entity:
    """A participant entity with its alternative surface forms."""

    name: str
    aliases: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.name.strip():
            raise ValidationError("entity name must be non-empty")
        aliases = tuple(a for a in self.aliases if a.strip())
        norms = {normalize(a) for a in aliases}
        if normalize(self.name) not in norms:
            aliases = (self.name,) + aliases
        object.__setattr__(self, "aliases", aliases)

    @property
    def key(self) -> str:
        return normalize(self.name)


def _contains_subsequence(haystack: Sequence[str], needle: Sequence[str]) -> bool:
    n = len(needle)
    if n == 0 or n > len(haystack):
        return False
    for start in range(len(haystack) - n + 1):
        if all(haystack[start + i] == needle[i] for i in range(n)):
            return True
    return False


def mentions(sentence: str, entity: Entity) -> bool:
    """True iff some alias occurs as a contiguous token subsequence of the sentence.

    Tokens are compared after naive plural stripping on both sides, so
    "Roots" matches the entity "root".
    """
    sent = tuple(singular(t) for t in tokenize(sentence))
    for alias in entity.aliases:
        needle = tuple(singular(t) for t in tokenize(alias))
        if needle and _contains_subsequence(sent, needle):
            return True
    return False


@dataclass(frozen=True)
class StateChange:
    """One cell of the state-change matrix.

    Locations are carried only where they make sense: Create may carry a
    destination, Destroy an origin, Move both; None carries neither.
    "?" is a legal location value meaning "unknown".
    """

    kind: ChangeKind
    from_loc: Optional[str] = None
    to_loc: Optional[str] = None

    def __post_init__(self):
        if self.kind is ChangeKind.NONE and (self.from_loc or self.to_loc):
            raise ValidationError("a None change carries no locations")
        if self.kind is ChangeKind.CREATE and self.from_loc is not None:
            raise ValidationError("a Create change carries no origin location")
        if self.kind is ChangeKind.DESTROY and self.to_loc is not None:
            raise ValidationError("a Destroy change carries no destination location")

    @classmethod
    def none(cls) -> "StateChange":
        return cls(ChangeKind.NONE)


NONE_CHANGE = StateChange(ChangeKind.NONE)


@dataclass(frozen=True)
class StateChangeMatrix:
    """T x n grid of state changes, indexed [step][entity], both 1-based."""

    cells: tuple[tuple[StateChange, ...], ...]

    def __post_init__(self):
        if not self.cells:
            raise ValidationError("matrix must have at least one step row")
        width = len(self.cells[0])
        if width == 0:
            raise ValidationError("matrix must have at least one entity column")
        if any(len(row) != width for row in self.cells):
            raise ValidationError("matrix rows must all have the same length")

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[StateChange]]) -> "StateChangeMatrix":
        return cls(tuple(tuple(row) for row in rows))

    @property
    def num_steps(self) -> int:
        return len(self.cells)

    @property
    def num_entities(self) -> int:
        return len(self.cells[0])

    def cell(self, step: int, entity_pos: int) -> StateChange:
        return self.cells[step - 1][entity_pos - 1]

    def row(self, step: int) -> tuple[StateChange, ...]:
        return self.cells[step - 1]

    def column(self, entity_pos: int) -> tuple[StateChange, ...]:
        return tuple(row[entity_pos - 1] for row in self.cells)


@dataclass(frozen=True)
class Violation:
    """One inconsistent cell found by validate_matrix."""

    step: int
    entity: str
    state: ExistenceState
    change: ChangeKind

    def __str__(self) -> str:
        return (
            f"step {self.step}, entity {self.entity!r}: "
            f"{self.change.value} is inconsistent with state {self.state.name}"
        )


@dataclass(frozen=True)
class DependencyEdge:
    """src enables dst via the given change on the given entity (src < dst)."""

    src: int
    dst: int
    entity: str
    change: StateChange

    def __post_init__(self):
        if self.src < 1 or self.src >= self.dst:
            raise ValidationError(
                f"dependency edges must run forward: got {self.src} -> {self.dst}"
            )
        if self.change.kind is ChangeKind.NONE:
            raise ValidationError("a dependency edge cannot be labeled with a None change")

    @property
    def key(self) -> tuple[int, int, str]:
        return (self.src, self.dst, normalize(self.entity))

    @property
    def sort_key(self) -> tuple[int, int, str, int]:
        return (self.src, self.dst, normalize(self.entity), self.change.kind.rank)


@dataclass(frozen=True)
class DependencyGraph:
    """Forward-directed multigraph of labeled enablement edges."""

    edges: frozenset[DependencyEdge] = field(default_factory=frozenset)

    def __post_init__(self):
        edges = frozenset(self.edges)
        keys = [e.key for e in edges]
        if len(set(keys)) != len(keys):
            raise ValidationError("at most one edge is allowed per (src, dst, entity)")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_edges(cls, edges: Iterable[DependencyEdge]) -> "DependencyGraph":
        return cls(frozenset(edges))

    def sorted_edges(self) -> tuple[DependencyEdge, ...]:
        return tuple(sorted(self.edges, key=lambda e: e.sort_key))

    def __len__(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class ProcessRecord:
    """One procedural paragraph with its participant entities.

    `steps` holds the sentences s_1..s_T; `entities` the participants.
    Optional gold annotations are validated on construction.
    """

    id: str
    topic: str
    steps: tuple[str, ...]
    entities: tuple[Entity, ...]
    gold_matrix: Optional[StateChangeMatrix] = None
    gold_graph: Optional[DependencyGraph] = None

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        object.__setattr__(self, "entities", tuple(self.entities))
        if not self.steps:
            raise ValidationError(f"process {self.id!r}: needs at least one step")
        if not self.entities:
            raise ValidationError(f"process {self.id!r}: needs at least one entity")
        keys = [e.key for e in self.entities]
        if len(set(keys)) != len(keys):
            raise ValidationError(f"process {self.id!r}: entity names must be unique")
        if self.gold_matrix is not None:
            bad = validate_matrix(self, self.gold_matrix)
            if bad:
                raise ValidationError(
                    f"process {self.id!r}: gold matrix is inconsistent",
                    tuple(str(v) for v in bad),
                )
        if self.gold_graph is not None:
            problems = validate_graph(self, self.gold_graph)
            if problems:
                raise ValidationError(
                    f"process {self.id!r}: gold graph is invalid", tuple(problems)
                )

    @property
    def num_steps(self) -> int:
        return len(self.steps)

    @property
    def num_entities(self) -> int:
        return len(self.entities)

    def sentence(self, step: int) -> str:
        if not 1 <= step <= self.num_steps:
            raise IndexError(f"step {step} out of range 1..{self.num_steps}")
        return self.steps[step - 1]

    def entity_position(self, name: str) -> int:
        """1-based position of the entity with this (normalized) name."""
        key = normalize(name)
        for pos, entity in enumerate(self.entities, start=1):
            if entity.key == key:
                return pos
        raise KeyError(f"process {self.id!r} has no entity named {name!r}")

    def find_entity(self, name: str) -> Optional[Entity]:
        key = normalize(name)
        for entity in self.entities:
            if entity.key == key:
                return entity
        return None


def validate_matrix(process: ProcessRecord, matrix: StateChangeMatrix) -> list[Violation]:
    """Fold every entity column through the existence automaton.

    Returns one Violation per inconsistent cell (the fold continues with the
    state unchanged after a violation, so later cells are still checked).
    """
    if (
        matrix.num_steps != process.num_steps
        or matrix.num_entities != process.num_entities
    ):
        raise DimensionMismatch(
            f"matrix is {matrix.num_steps}x{matrix.num_entities}, "
            f"process {process.id!r} is {process.num_steps}x{process.num_entities}"
        )
    violations: list[Violation] = []
    for pos, entity in enumerate(process.entities, start=1):
        state = ExistenceState.UNKNOWN
        for step in range(1, matrix.num_steps + 1):
            change = matrix.cell(step, pos)
            try:
                state = apply_change(state, change.kind)
            except InconsistentTransition:
                violations.append(Violation(step, entity.name, state, change.kind))
    return violations


def validate_graph(process: ProcessRecord, graph: DependencyGraph) -> list[str]:
    """Check that a graph references only valid steps and declared entities."""
    problems = []
    names = {e.key for e in process.entities}
    for edge in graph.sorted_edges():
        if edge.dst > process.num_steps:
            problems.append(f"edge {edge.src}->{edge.dst} exceeds step count {process.num_steps}")
        if normalize(edge.entity) not in names:
            problems.append(f"edge {edge.src}->{edge.dst} names unknown entity {edge.entity!r}")
    return problems


def next_mention(process: ProcessRecord, after_step: int, entity: Entity) -> Optional[int]:
    """Smallest step index > after_step whose sentence mentions the entity."""
    if not 1 <= after_step <= process.num_steps:
        raise IndexError(f"after_step {after_step} out of range 1..{process.num_steps}")
    for j in range(after_step + 1, process.num_steps + 1):
        if mentions(process.sentence(j), entity):
            return j
    return None
