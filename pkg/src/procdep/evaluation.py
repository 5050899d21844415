"""Metrics for the dependency task and the state-change task.

Dependency task: every edge decomposes into three atomic elements, all
anchored on the (src, dst) pair — the target itself, the enabling entity,
and the enabling change kind — and element multisets are matched exactly
per process.  A predicted edge with the wrong target therefore earns no
credit at all.

State-change task: the inputs, outputs, conversions and movements implied
by a matrix are compared as sets per process and category, with "?" (or an
absent location) matching any location.  Wildcards make pairings
ambiguous, so matching uses maximum bipartite matching, which keeps the
precision/recall swap symmetry exact.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

from .errors import InvalidMatrix, ProcessMismatch
from .model import (
    ChangeKind,
    DependencyGraph,
    ProcessRecord,
    StateChangeMatrix,
    normalize,
    validate_matrix,
)

DEPENDENCY_CATEGORIES = ("target", "entity", "change")
STATECHANGE_CATEGORIES = ("inputs", "outputs", "conversions", "movements")


@dataclass(frozen=True)
class TaskCounts:
    matched: int = 0
    predicted: int = 0
    gold: int = 0

    def __add__(self, other: "TaskCounts") -> "TaskCounts":
        return TaskCounts(
            self.matched + other.matched,
            self.predicted + other.predicted,
            self.gold + other.gold,
        )

    @property
    def precision(self) -> float:
        if self.predicted == 0:
            return 1.0 if self.gold == 0 else 0.0
        return self.matched / self.predicted

    @property
    def recall(self) -> float:
        if self.gold == 0:
            return 1.0
        return self.matched / self.gold

    @property
    def f1(self) -> float:
        return f1(self.precision, self.recall)


def f1(p: float, r: float) -> float:
    """Harmonic mean; 0 when both sides are 0.  Scale-invariant, so percents work too."""
    if p + r == 0:
        return 0.0
    return 2.0 * p * r / (p + r)


@dataclass(frozen=True)
class EvalReport:
    """Corpus-level metrics with per-process and per-category breakdowns."""

    precision: float
    recall: float
    f1: float
    counts: TaskCounts
    per_process: Mapping[str, TaskCounts] = field(default_factory=dict)
    per_category: Mapping[str, TaskCounts] = field(default_factory=dict)
    average: str = "micro"


def _aggregate(
    per_process: dict[str, TaskCounts],
    per_category: dict[str, TaskCounts],
    average: str,
) -> EvalReport:
    total = TaskCounts()
    for counts in per_process.values():
        total = total + counts
    if average == "micro":
        p, r, f = total.precision, total.recall, total.f1
    elif average == "macro":
        n = max(len(per_process), 1)
        p = sum(c.precision for c in per_process.values()) / n
        r = sum(c.recall for c in per_process.values()) / n
        f = sum(c.f1 for c in per_process.values()) / n
    else:
        raise ValueError(f"average must be 'micro' or 'macro', got {average!r}")
    return EvalReport(p, r, f, total, dict(per_process), dict(per_category), average)


# ---------------------------------------------------------------------------
# Dependency task


def _edge_elements(graph: DependencyGraph) -> dict[str, Counter]:
    elements: dict[str, Counter] = {name: Counter() for name in DEPENDENCY_CATEGORIES}
    for edge in graph.edges:
        anchor = (edge.src, edge.dst)
        elements["target"][anchor] += 1
        elements["entity"][anchor + (normalize(edge.entity),)] += 1
        elements["change"][anchor + (edge.change.kind,)] += 1
    return elements


def _check_keys(pred: Mapping[str, object], gold: Mapping[str, object]) -> None:
    if set(pred) != set(gold):
        missing = sorted(set(gold) - set(pred))
        extra = sorted(set(pred) - set(gold))
        raise ProcessMismatch(
            f"prediction/gold process sets differ (missing: {missing}, extra: {extra})"
        )


def dependency_metrics(
    pred: Mapping[str, DependencyGraph],
    gold: Mapping[str, DependencyGraph],
    average: str = "micro",
) -> EvalReport:
    """Element-level precision/recall/F1 over per-process element multisets."""
    _check_keys(pred, gold)
    per_process: dict[str, TaskCounts] = {}
    per_category = {name: TaskCounts() for name in DEPENDENCY_CATEGORIES}
    for pid in sorted(pred):
        pred_elems = _edge_elements(pred[pid])
        gold_elems = _edge_elements(gold[pid])
        process_total = TaskCounts()
        for name in DEPENDENCY_CATEGORIES:
            overlap = pred_elems[name] & gold_elems[name]
            counts = TaskCounts(
                matched=sum(overlap.values()),
                predicted=sum(pred_elems[name].values()),
                gold=sum(gold_elems[name].values()),
            )
            per_category[name] = per_category[name] + counts
            process_total = process_total + counts
        per_process[pid] = process_total
    return _aggregate(per_process, per_category, average)


# ---------------------------------------------------------------------------
# State-change task


@dataclass(frozen=True)
class QuestionSet:
    """The four question categories derivable from one matrix."""

    inputs: frozenset[str] = frozenset()
    outputs: frozenset[str] = frozenset()
    conversions: frozenset[tuple[frozenset[str], frozenset[str], int]] = frozenset()
    movements: frozenset[tuple[str, Optional[str], Optional[str], int]] = frozenset()

    def category(self, name: str) -> frozenset:
        return getattr(self, name)


def statechange_questions(process: ProcessRecord, matrix: StateChangeMatrix) -> QuestionSet:
    """Inputs, outputs, conversions and movements implied by a matrix.

    Inputs are entities destroyed with no earlier creation; outputs are
    entities created with no later destruction; a conversion pairs the
    destroyed and created entity sets of any step that has both; movements
    carry the cell's locations.
    """
    bad = validate_matrix(process, matrix)
    if bad:
        raise InvalidMatrix(
            f"process {process.id!r}: " + "; ".join(str(v) for v in bad)
        )
    inputs, outputs = set(), set()
    movements = set()
    destroyed_at: dict[int, set[str]] = {}
    created_at: dict[int, set[str]] = {}
    for pos, entity in enumerate(process.entities, start=1):
        column = matrix.column(pos)
        create_steps = [t for t, c in enumerate(column, start=1) if c.kind is ChangeKind.CREATE]
        destroy_steps = [t for t, c in enumerate(column, start=1) if c.kind is ChangeKind.DESTROY]
        if any(not any(u < t for u in create_steps) for t in destroy_steps):
            inputs.add(entity.name)
        if any(not any(u > t for u in destroy_steps) for t in create_steps):
            outputs.add(entity.name)
        for t in create_steps:
            created_at.setdefault(t, set()).add(entity.name)
        for t in destroy_steps:
            destroyed_at.setdefault(t, set()).add(entity.name)
        for t, change in enumerate(column, start=1):
            if change.kind is ChangeKind.MOVE:
                movements.add((entity.name, change.from_loc, change.to_loc, t))
    conversions = {
        (frozenset(destroyed_at[t]), frozenset(created_at[t]), t)
        for t in destroyed_at
        if t in created_at
    }
    return QuestionSet(
        inputs=frozenset(inputs),
        outputs=frozenset(outputs),
        conversions=frozenset(conversions),
        movements=frozenset(movements),
    )


def _loc_match(a: Optional[str], b: Optional[str]) -> bool:
    if a is None or b is None or a == "?" or b == "?":
        return True
    return normalize(a) == normalize(b)


def _names_equal(a: str, b: str) -> bool:
    return normalize(a) == normalize(b)


def _name_set(values) -> frozenset[str]:
    return frozenset(normalize(v) for v in values)


def _match_fn(category: str) -> Callable[[object, object], bool]:
    if category in ("inputs", "outputs"):
        return lambda a, b: _names_equal(a, b)  # type: ignore[arg-type]
    if category == "conversions":
        return lambda a, b: (
            a[2] == b[2] and _name_set(a[0]) == _name_set(b[0]) and _name_set(a[1]) == _name_set(b[1])  # type: ignore[index]
        )
    if category == "movements":
        return lambda a, b: (
            a[3] == b[3]  # type: ignore[index]
            and _names_equal(a[0], b[0])  # type: ignore[index]
            and _loc_match(a[1], b[1])  # type: ignore[index]
            and _loc_match(a[2], b[2])  # type: ignore[index]
        )
    raise ValueError(f"unknown category {category!r}")


def _max_matching(pred_items: Sequence, gold_items: Sequence, match) -> int:
    """Size of a maximum bipartite matching (Kuhn's augmenting paths)."""
    adjacency = [
        [j for j, g in enumerate(gold_items) if match(p, g)] for p in pred_items
    ]
    owner: dict[int, int] = {}

    def assign(i: int, seen: set[int]) -> bool:
        for j in adjacency[i]:
            if j in seen:
                continue
            seen.add(j)
            if j not in owner or assign(owner[j], seen):
                owner[j] = i
                return True
        return False

    return sum(1 for i in range(len(pred_items)) if assign(i, set()))


def statechange_metrics(
    pred: Mapping[str, QuestionSet],
    gold: Mapping[str, QuestionSet],
    average: str = "micro",
) -> EvalReport:
    """Per-category set precision/recall with wildcard-aware location matching."""
    _check_keys(pred, gold)
    per_process: dict[str, TaskCounts] = {}
    per_category = {name: TaskCounts() for name in STATECHANGE_CATEGORIES}
    for pid in sorted(pred):
        process_total = TaskCounts()
        for name in STATECHANGE_CATEGORIES:
            pred_items = sorted(pred[pid].category(name), key=repr)
            gold_items = sorted(gold[pid].category(name), key=repr)
            matched = _max_matching(pred_items, gold_items, _match_fn(name))
            counts = TaskCounts(matched, len(pred_items), len(gold_items))
            per_category[name] = per_category[name] + counts
            process_total = process_total + counts
        per_process[pid] = process_total
    return _aggregate(per_process, per_category, average)
