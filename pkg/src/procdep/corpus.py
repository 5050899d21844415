"""Readers and writers for the on-disk formats.

Formats handled here:

* Canonical process file: one UTF-8 JSON document, ``{"processes": [...]}``.
  Each process object has ``id``, ``topic``, ``steps`` (list of sentences),
  ``entities`` (strings, with ";" separating aliases, or objects with
  ``name``/``aliases``), and optional ``gold_matrix`` (rows of cell strings)
  and ``gold_graph`` (edge objects).
* Cell strings: ``-`` for no change, else ``C``/``M``/``D`` optionally
  followed by a space and ``from→to`` ("->" also accepted); an empty side
  means "no location", ``?`` is the unknown-location value.
* Grid TSV: blank-line-separated blocks, one per process.  Block layout:
  an ``id<TAB>topic`` line, a ``step<TAB>sentence<TAB><entity>...`` header,
  then one row per step with the step index, the sentence, and one cell
  per entity.
* Logits TSV: mandatory header ``process_id step entity lp_create lp_move
  lp_destroy lp_none from to`` (tab-separated); ``?`` marks an absent
  location.
* Prior table TSV: header ``topic entity change probability``; ``*`` is the
  wildcard.
* Edge score TSV: ``[exact]`` and ``[generic]`` section markers, each
  followed by its own header and rows.
* Graph export: Graphviz DOT text with deterministic ordering.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import ParseError, ValidationError
from .model import (
    ChangeKind,
    DependencyEdge,
    DependencyGraph,
    Entity,
    ProcessRecord,
    StateChange,
    StateChangeMatrix,
)
from .providers import (
    EdgeScoreTable,
    LogitsKey,
    LogitsRecord,
    TopicPriorTable,
    logits_key,
)

LOGITS_COLUMNS = (
    "process_id",
    "step",
    "entity",
    "lp_create",
    "lp_move",
    "lp_destroy",
    "lp_none",
    "from",
    "to",
)


@dataclass(frozen=True)
class CorpusFile:
    """An ordered collection of processes with unique ids."""

    processes: tuple[ProcessRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "processes", tuple(self.processes))
        ids = [p.id for p in self.processes]
        if len(set(ids)) != len(ids):
            raise ValidationError("process ids must be unique within a corpus file")

    def by_id(self) -> dict[str, ProcessRecord]:
        return {p.id: p for p in self.processes}

    def __len__(self) -> int:
        return len(self.processes)


# ---------------------------------------------------------------------------
# Cell grammar


def parse_cell(text: str) -> StateChange:
    """Parse one grid cell: "-", or "C"/"M"/"D" with an optional "from→to" suffix."""
    raw = text.strip()
    if raw == "-":
        return StateChange(ChangeKind.NONE)
    if not raw:
        raise ParseError("empty matrix cell")
    code, _, suffix = raw.partition(" ")
    kinds = {"C": ChangeKind.CREATE, "M": ChangeKind.MOVE, "D": ChangeKind.DESTROY}
    if code not in kinds:
        raise ParseError(f"unknown cell code {code!r} in cell {text!r}")
    from_loc = to_loc = None
    suffix = suffix.strip()
    if suffix:
        arrow = "→" if "→" in suffix else "->"
        if arrow not in suffix:
            raise ParseError(f"cell {text!r}: location suffix must contain '→'")
        left, _, right = suffix.partition(arrow)
        from_loc = left.strip() or None
        to_loc = right.strip() or None
    try:
        return StateChange(kinds[code], from_loc, to_loc)
    except ValidationError as exc:
        raise ParseError(f"cell {text!r}: {exc}") from exc


def format_cell(change: StateChange) -> str:
    if change.kind is ChangeKind.NONE:
        return "-"
    if change.from_loc is None and change.to_loc is None:
        return change.kind.code
    return f"{change.kind.code} {change.from_loc or ''}→{change.to_loc or ''}"


def _parse_entity(value) -> Entity:
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(";") if p.strip()]
        if not parts:
            raise ParseError(f"empty entity name in {value!r}")
        return Entity(parts[0], tuple(parts))
    if isinstance(value, dict):
        return Entity(str(value["name"]), tuple(str(a) for a in value.get("aliases", ())))
    raise ParseError(f"entity entries must be strings or objects, got {value!r}")


def _format_entity(entity: Entity) -> str:
    extras = [a for a in entity.aliases if a != entity.name]
    return "; ".join([entity.name] + extras)


def _parse_edge(obj) -> DependencyEdge:
    try:
        return DependencyEdge(
            src=int(obj["src"]),
            dst=int(obj["dst"]),
            entity=str(obj["entity"]),
            change=parse_cell(str(obj["change"])),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed graph edge {obj!r}: {exc}") from exc


def edge_to_dict(edge: DependencyEdge) -> dict:
    """Canonical JSON object for one edge (same shape as gold_graph entries)."""
    return {
        "src": edge.src,
        "dst": edge.dst,
        "entity": edge.entity,
        "change": format_cell(edge.change),
    }


# ---------------------------------------------------------------------------
# Canonical JSON corpus


def _parse_process(obj, index: int) -> ProcessRecord:
    if not isinstance(obj, dict):
        raise ParseError(f"process #{index}: expected an object, got {type(obj).__name__}")
    try:
        pid = str(obj["id"])
        steps = tuple(str(s) for s in obj["steps"])
        entities = tuple(_parse_entity(e) for e in obj["entities"])
    except KeyError as exc:
        raise ParseError(f"process #{index}: missing field {exc}") from exc
    topic = str(obj.get("topic", ""))
    matrix = None
    if obj.get("gold_matrix") is not None:
        rows = [
            tuple(parse_cell(str(cell)) for cell in row) for row in obj["gold_matrix"]
        ]
        matrix = StateChangeMatrix.from_rows(rows)
    graph = None
    if obj.get("gold_graph") is not None:
        graph = DependencyGraph.from_edges(_parse_edge(e) for e in obj["gold_graph"])
    return ProcessRecord(pid, topic, steps, entities, matrix, graph)


def load_corpus(path: str) -> CorpusFile:
    """Load and validate a canonical corpus file.

    Raises ParseError for malformed content and ValidationError listing
    every violation across all processes (the whole file is checked before
    failing).
    """
    with open(path, encoding="utf-8") as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=exc.lineno) from exc
    if not isinstance(doc, dict) or "processes" not in doc:
        raise ParseError('corpus document must be an object with a "processes" list')
    processes = []
    problems: list[str] = []
    for index, obj in enumerate(doc["processes"], start=1):
        try:
            processes.append(_parse_process(obj, index))
        except ValidationError as exc:
            problems.append(str(exc))
    if problems:
        raise ValidationError(f"{path}: {len(problems)} invalid process(es)", tuple(problems))
    return CorpusFile(tuple(processes))


def corpus_to_dict(corpus: CorpusFile) -> dict:
    out = []
    for p in corpus.processes:
        obj: dict = {
            "id": p.id,
            "topic": p.topic,
            "steps": list(p.steps),
            "entities": [_format_entity(e) for e in p.entities],
        }
        if p.gold_matrix is not None:
            obj["gold_matrix"] = [
                [format_cell(c) for c in row] for row in p.gold_matrix.cells
            ]
        if p.gold_graph is not None:
            obj["gold_graph"] = [edge_to_dict(e) for e in p.gold_graph.sorted_edges()]
        out.append(obj)
    return {"processes": out}


def write_corpus(corpus: CorpusFile, path: str) -> None:
    atomic_write_text(path, json.dumps(corpus_to_dict(corpus), indent=2, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# Grid TSV


def load_grid_tsv(path: str) -> CorpusFile:
    """Load the tab-separated grid layout (see module docstring for the block shape)."""
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    blocks: list[list[tuple[int, str]]] = []
    current: list[tuple[int, str]] = []
    for lineno, line in enumerate(lines, start=1):
        if line.strip():
            current.append((lineno, line))
        elif current:
            blocks.append(current)
            current = []
    if current:
        blocks.append(current)
    processes = []
    problems: list[str] = []
    for block in blocks:
        try:
            processes.append(_parse_grid_block(block))
        except ValidationError as exc:
            problems.append(str(exc))
    if problems:
        raise ValidationError(f"{path}: {len(problems)} invalid process(es)", tuple(problems))
    return CorpusFile(tuple(processes))


def _parse_grid_block(block: list[tuple[int, str]]) -> ProcessRecord:
    if len(block) < 3:
        raise ParseError("grid block needs an id line, a header, and at least one step", block[0][0])
    (id_line_no, id_line), (hdr_line_no, hdr_line) = block[0], block[1]
    id_fields = id_line.split("\t")
    pid = id_fields[0].strip()
    topic = id_fields[1].strip() if len(id_fields) > 1 else ""
    header = hdr_line.split("\t")
    if len(header) < 3 or header[0].strip().lower() != "step":
        raise ParseError('grid header must start with "step<TAB>sentence"', hdr_line_no)
    entities = tuple(_parse_entity(name) for name in header[2:])
    width = len(header)
    steps: list[str] = []
    rows: list[tuple[StateChange, ...]] = []
    for lineno, line in block[2:]:
        fields = line.split("\t")
        if len(fields) != width:
            raise ParseError(
                f"expected {width} columns, got {len(fields)}", lineno
            )
        expected = len(steps) + 1
        if fields[0].strip() != str(expected):
            raise ParseError(f"expected step index {expected}, got {fields[0]!r}", lineno)
        steps.append(fields[1])
        try:
            rows.append(tuple(parse_cell(cell) for cell in fields[2:]))
        except ParseError as exc:
            raise ParseError(str(exc), lineno) from exc
    matrix = StateChangeMatrix.from_rows(rows)
    return ProcessRecord(pid, topic, tuple(steps), entities, matrix, None)


# ---------------------------------------------------------------------------
# Logits TSV


def load_logits(path: str) -> dict[LogitsKey, LogitsRecord]:
    """Load a logits TSV into a lookup keyed by (process_id, step, entity)."""
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines or tuple(lines[0].split("\t")) != LOGITS_COLUMNS:
        raise ParseError(
            "logits file must start with the header: " + "\t".join(LOGITS_COLUMNS), line=1
        )
    lookup: dict[LogitsKey, LogitsRecord] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != len(LOGITS_COLUMNS):
            raise ParseError(f"expected {len(LOGITS_COLUMNS)} columns, got {len(fields)}", lineno)
        try:
            step = int(fields[1])
            logp = tuple(float(v) for v in fields[3:7])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
        record = LogitsRecord(
            process_id=fields[0],
            step=step,
            entity=fields[2],
            logp=logp,  # type: ignore[arg-type]
            from_loc=None if fields[7] == "?" else fields[7],
            to_loc=None if fields[8] == "?" else fields[8],
        )
        record.validate()
        lookup[logits_key(record.process_id, record.step, record.entity)] = record
    return lookup


def write_logits(records: Iterable[LogitsRecord], path: str) -> None:
    rows = ["\t".join(LOGITS_COLUMNS)]
    for rec in records:
        rows.append(
            "\t".join(
                [
                    rec.process_id,
                    str(rec.step),
                    rec.entity,
                    *(repr(lp) for lp in rec.logp),
                    rec.from_loc if rec.from_loc is not None else "?",
                    rec.to_loc if rec.to_loc is not None else "?",
                ]
            )
        )
    atomic_write_text(path, "\n".join(rows) + "\n")


# ---------------------------------------------------------------------------
# Prior and edge-score tables


def load_prior_table(path: str) -> TopicPriorTable:
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    rows = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if lineno == 1 and fields[0].strip().lower() == "topic":
            continue
        if len(fields) != 4:
            raise ParseError(f"expected 4 columns, got {len(fields)}", lineno)
        topic, entity, change, prob = (f.strip() for f in fields)
        try:
            kind = ChangeKind.from_name(change)
            p = float(prob)
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
        if not 0.0 < p <= 1.0:
            raise ParseError(f"probability must be in (0, 1], got {p}", lineno)
        topic_key = topic if topic == "*" else topic.lower()
        entity_key = entity if entity == "*" else _prior_entity_key(entity)
        rows[(topic_key, entity_key, kind)] = p
    return TopicPriorTable(rows)


def _prior_entity_key(entity: str) -> str:
    from .providers import entity_lemma

    return entity_lemma(entity)


def load_edge_table(path: str) -> EdgeScoreTable:
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    exact: dict = {}
    generic: dict = {}
    section: Optional[str] = None
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped == "[exact]":
            section = "exact"
            continue
        if stripped == "[generic]":
            section = "generic"
            continue
        if section is None:
            raise ParseError("rows must appear under an [exact] or [generic] marker", lineno)
        fields = line.split("\t")
        if fields[0].strip().lower() in ("process_id", "entity") and not _is_float(fields[-1]):
            continue  # section header row
        try:
            if section == "exact":
                if len(fields) != 5:
                    raise ParseError(f"exact rows need 5 columns, got {len(fields)}", lineno)
                pid, src, entity, change, score = (f.strip() for f in fields)
                exact[(pid, int(src), entity.lower(), ChangeKind.from_name(change))] = float(score)
            else:
                if len(fields) != 4:
                    raise ParseError(f"generic rows need 4 columns, got {len(fields)}", lineno)
                entity, change, verb, score = (f.strip() for f in fields)
                generic[(_prior_entity_key(entity), ChangeKind.from_name(change), verb.lower())] = float(score)
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
    try:
        return EdgeScoreTable(exact, generic)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def _is_float(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


# ---------------------------------------------------------------------------
# DOT export


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def export_dot(graph: DependencyGraph, process: ProcessRecord) -> str:
    """Render the graph as Graphviz DOT text with deterministic ordering.

    One node per step labeled with a sentence prefix, one edge per
    dependency labeled "KIND(entity)"; edges are ordered by (src, dst,
    entity), so parallel edges come out in entity order.
    """
    lines = [f'digraph "{_dot_escape(process.id)}" {{']
    for step in range(1, process.num_steps + 1):
        prefix = process.sentence(step)[:40]
        lines.append(f'  s{step} [label="s_{step}: {_dot_escape(prefix)}"];')
    for edge in graph.sorted_edges():
        label = f"{edge.change.kind.value.upper()}({edge.entity})"
        lines.append(f'  s{edge.src} -> s{edge.dst} [label="{_dot_escape(label)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Atomic writes


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file + rename so partial files never appear."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    tmp = os.path.join(directory, f".{os.path.basename(path)}.tmp")
    with open(tmp, "w", encoding="utf-8") as handle:
        handle.write(text)
    os.replace(tmp, path)
