"""Dependency-graph derivation from state-change matrices.

The derivation rests on a coherence assumption: a state change on entity e
at step i exists to enable the next step that needs e.  Two modes control
what counts as "needing" e:

* MENTION_ONLY: the next step whose sentence mentions e.  Targets are
  computable from the text alone, so this is the mode used while decoding
  (future cells of the matrix are still undecided).
* MENTION_OR_CHANGE: the next step that mentions e or changes e's state
  again.  This is the full rule, used for final outputs and gold graphs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .errors import InvalidMatrix
from .model import (
    ChangeKind,
    DependencyEdge,
    DependencyGraph,
    ProcessRecord,
    StateChangeMatrix,
    mentions,
    validate_matrix,
)


class DeriveMode(Enum):
    MENTION_ONLY = "mention-only"
    MENTION_OR_CHANGE = "mention-or-change"


@dataclass(frozen=True)
class NextMentionTable:
    """Precomputed next_mention for every (step, entity) pair.

    target(i, k) is the smallest j > i whose sentence mentions entity k,
    or None; both indices are 1-based, with k the entity's position in the
    process's declared order.
    """

    targets: tuple[tuple[Optional[int], ...], ...]

    def target(self, step: int, entity_pos: int) -> Optional[int]:
        return self.targets[step - 1][entity_pos - 1]


def incremental_targets(process: ProcessRecord) -> NextMentionTable:
    """Build the next-mention table in O(T*n) with a reverse scan."""
    T = process.num_steps
    columns = []
    for entity in process.entities:
        nxt: list[Optional[int]] = [None] * (T + 1)
        for i in range(T - 1, 0, -1):
            if mentions(process.sentence(i + 1), entity):
                nxt[i] = i + 1
            else:
                nxt[i] = nxt[i + 1]
        columns.append(nxt)
    rows = tuple(
        tuple(columns[k][i] for k in range(process.num_entities)) for i in range(1, T + 1)
    )
    return NextMentionTable(rows)


def derive_graph(
    process: ProcessRecord,
    matrix: StateChangeMatrix,
    mode: DeriveMode = DeriveMode.MENTION_OR_CHANGE,
) -> DependencyGraph:
    """Derive the dependency graph implied by a state-change matrix.

    For every non-None cell (i, k), the edge target is the first later step
    that mentions entity k (MENTION_ONLY) or that mentions it or changes it
    again (MENTION_OR_CHANGE).  Cells with no forward target emit no edge.
    """
    bad = validate_matrix(process, matrix)
    if bad:
        raise InvalidMatrix(
            f"process {process.id!r}: " + "; ".join(str(v) for v in bad)
        )
    edges = []
    for pos, entity in enumerate(process.entities, start=1):
        for i in range(1, process.num_steps + 1):
            change = matrix.cell(i, pos)
            if change.kind is ChangeKind.NONE:
                continue
            target = None
            for j in range(i + 1, process.num_steps + 1):
                if mentions(process.sentence(j), entity) or (
                    mode is DeriveMode.MENTION_OR_CHANGE
                    and matrix.cell(j, pos).kind is not ChangeKind.NONE
                ):
                    target = j
                    break
            if target is not None:
                edges.append(DependencyEdge(i, target, entity.name, change))
    return DependencyGraph.from_edges(edges)
