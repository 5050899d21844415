"""Batch command-line driver.

Subcommands: validate, derive, decode, eval, export-dot.  Options may come
from a key=value config file (--config); explicit flags override file
values, which override defaults.  Exit codes: 0 success, 1 validation or
evaluation mismatch, 2 I/O or configuration failure.
"""

from __future__ import annotations

import argparse
import functools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

from .corpus import (
    CorpusFile,
    atomic_write_text,
    edge_to_dict,
    export_dot,
    load_corpus,
    load_edge_table,
    load_logits,
    load_prior_table,
    write_corpus,
)
from .decoding import DecoderConfig, DecodeResult, decode
from .errors import (
    ConfigError,
    NormalizationError,
    ParseError,
    ProcdepError,
    ProcessMismatch,
    TooLarge,
    ValidationError,
)
from .evaluation import dependency_metrics, statechange_metrics, statechange_questions
from .graphs import DeriveMode, derive_graph
from .model import ProcessRecord
from .providers import FileLogitProvider, LexicalLogitProvider
from .reporting import render_metrics_figure, render_scores_figure, write_report

DEFAULTS = {
    "corpus": None,
    "provider": "lexical",
    "logits": None,
    "priors": None,
    "edge_scores": None,
    "lambda": 0.5,
    "alpha": 0.8,
    "beta": 0.8,
    "c": 0.5,
    "beam": 20,
    "cap": 128,
    "g_edge": True,
    "g_kb": True,
    "jobs": 1,
    "out": "out",
    "average": "micro",
    "dot": False,
}

_BOOL_KEYS = {"g_edge", "g_kb", "dot"}
_FLOAT_KEYS = {"lambda", "alpha", "beta", "c"}
_INT_KEYS = {"beam", "cap", "jobs"}


def _coerce(key: str, value: str):
    if key in _BOOL_KEYS:
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config key {key!r}: expected a boolean, got {value!r}")
    try:
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _INT_KEYS:
            return int(value)
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from exc
    return value


def load_config_file(path: str) -> dict:
    values = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
            key, _, value = stripped.partition("=")
            key = key.strip().replace("-", "_")
            if key not in DEFAULTS:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _coerce(key, value.strip())
    return values


def merge_options(args: argparse.Namespace) -> dict:
    """Precedence: explicit flags > config file > defaults."""
    opts = dict(DEFAULTS)
    if getattr(args, "config", None):
        opts.update(load_config_file(args.config))
    mapping = {
        "corpus": "corpus",
        "provider": "provider",
        "logits": "logits",
        "priors": "priors",
        "edge_scores": "edge_scores",
        "lambda_": "lambda",
        "alpha": "alpha",
        "beta": "beta",
        "c": "c",
        "beam": "beam",
        "cap": "cap",
        "jobs": "jobs",
        "out": "out",
        "average": "average",
    }
    for attr, key in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            opts[key] = value
    if getattr(args, "no_g_edge", False):
        opts["g_edge"] = False
    if getattr(args, "no_g_kb", False):
        opts["g_kb"] = False
    if getattr(args, "dot", False):
        opts["dot"] = True
    return opts


def decoder_config(opts: dict) -> DecoderConfig:
    return DecoderConfig(
        state_weight=opts["lambda"],
        logit_weight=opts["alpha"],
        connectivity_weight=opts["beta"],
        purpose_bonus=opts["c"],
        beam_width=opts["beam"],
        candidate_cap=opts["cap"],
    )


@functools.lru_cache(maxsize=8)
def _cached_logits(path: str):
    return load_logits(path)


@functools.lru_cache(maxsize=8)
def _cached_priors(path: str):
    return load_prior_table(path)


@functools.lru_cache(maxsize=8)
def _cached_edges(path: str):
    return load_edge_table(path)


def _build_provider(opts: dict) -> FileLogitProvider | LexicalLogitProvider:
    spec = opts["provider"]
    if spec.startswith("file:"):
        path: Optional[str] = spec.split(":", 1)[1]
    elif spec == "file":
        path = opts["logits"]
    elif spec == "lexical":
        path = None
    else:
        raise ConfigError(f"provider must be 'lexical' or 'file[:path]', got {spec!r}")
    if spec != "lexical" and not path:
        raise ConfigError("file provider requires --logits (or provider=file:<path>)")
    if path is None:
        return LexicalLogitProvider()
    return FileLogitProvider(_cached_logits(path))


def _decode_worker(payload: tuple[ProcessRecord, dict]) -> tuple[str, DecodeResult, int]:
    process, opts = payload
    provider = _build_provider(opts)
    priors = _cached_priors(opts["priors"]) if opts["priors"] else None
    scorer = _cached_edges(opts["edge_scores"]) if opts["edge_scores"] else None
    result = decode(
        process,
        provider,
        priors,
        scorer,
        decoder_config(opts),
        use_connectivity=opts["g_edge"],
        use_edge_prior=opts["g_kb"],
    )
    warnings = len(getattr(provider, "coverage_warnings", ()))
    return process.id, result, warnings


def _run_jobs(payloads, jobs: int):
    if jobs <= 1:
        return [_decode_worker(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_decode_worker, payloads))


# ---------------------------------------------------------------------------
# Subcommand handlers


def cmd_validate(opts: dict) -> int:
    try:
        corpus = load_corpus(opts["corpus"])
    except ValidationError as exc:
        print(f"INVALID: {exc}", file=sys.stderr)
        return 1
    print(f"OK: {len(corpus)} process(es) validated")
    return 0


def cmd_derive(opts: dict) -> int:
    corpus = load_corpus(opts["corpus"])
    out_dir = opts["out"]
    os.makedirs(out_dir, exist_ok=True)
    written = 0
    for process in corpus.processes:
        if process.gold_matrix is None:
            print(f"warning: {process.id}: no gold matrix, skipped", file=sys.stderr)
            continue
        graph = derive_graph(process, process.gold_matrix, DeriveMode.MENTION_OR_CHANGE)
        edges = [edge_to_dict(e) for e in graph.sorted_edges()]
        atomic_write_text(
            os.path.join(out_dir, f"{process.id}.graph.json"),
            json.dumps({"id": process.id, "edges": edges}, indent=2, ensure_ascii=False) + "\n",
        )
        if opts["dot"]:
            atomic_write_text(
                os.path.join(out_dir, f"{process.id}.dot"), export_dot(graph, process)
            )
        written += 1
    print(f"derived {written} graph(s) into {out_dir}")
    return 0


def cmd_decode(opts: dict) -> int:
    corpus = load_corpus(opts["corpus"])
    _build_provider(opts)  # fail fast on bad provider config
    decoder_config(opts).validate()
    out_dir = opts["out"]
    os.makedirs(out_dir, exist_ok=True)
    outputs = _run_jobs([(p, opts) for p in corpus.processes], opts["jobs"])
    by_id = {pid: (result, warnings) for pid, result, warnings in outputs}
    predicted = []
    for process in corpus.processes:
        result, _ = by_id[process.id]
        predicted.append(
            ProcessRecord(
                process.id,
                process.topic,
                process.steps,
                process.entities,
                result.matrix,
                result.graph,
            )
        )
    write_corpus(CorpusFile(tuple(predicted)), os.path.join(out_dir, "predictions.json"))
    lines = ["process_id\tscore\tedges\tfallback_warnings"]
    for process in corpus.processes:
        result, warnings = by_id[process.id]
        lines.append(f"{process.id}\t{result.score:.6f}\t{len(result.graph)}\t{warnings}")
    atomic_write_text(os.path.join(out_dir, "summary.tsv"), "\n".join(lines) + "\n")
    scores = [(p.id, by_id[p.id][0].score) for p in corpus.processes]
    if scores:
        render_scores_figure(scores, os.path.join(out_dir, "scores.png"))
    mean = sum(s for _, s in scores) / len(scores) if scores else 0.0
    total_warnings = sum(w for _, _, w in outputs)
    print(f"decoded {len(corpus)} process(es); mean path score {mean:.6f}; "
          f"fallback warnings {total_warnings}")
    return 0


def _graphs_and_questions(corpus: CorpusFile):
    graphs, questions = {}, {}
    for process in corpus.processes:
        if process.gold_matrix is not None:
            questions[process.id] = statechange_questions(process, process.gold_matrix)
            if process.gold_graph is not None:
                graphs[process.id] = process.gold_graph
            else:
                graphs[process.id] = derive_graph(
                    process, process.gold_matrix, DeriveMode.MENTION_OR_CHANGE
                )
        elif process.gold_graph is not None:
            graphs[process.id] = process.gold_graph
    return graphs, questions


def cmd_eval(opts: dict, pred_path: str, gold_path: str, tasks: str = "both") -> int:
    pred = load_corpus(pred_path)
    gold = load_corpus(gold_path)
    pred_graphs, pred_questions = _graphs_and_questions(pred)
    gold_graphs, gold_questions = _graphs_and_questions(gold)
    average = opts["average"]
    out_dir = opts["out"]
    os.makedirs(out_dir, exist_ok=True)
    reports = {}
    if tasks in ("both", "dependency"):
        reports["dependency"] = dependency_metrics(pred_graphs, gold_graphs, average)
        write_report(
            reports["dependency"],
            os.path.join(out_dir, "dependency_report.tsv"),
            os.path.join(out_dir, "dependency_report.txt"),
            "dependency task",
        )
    if tasks in ("both", "statechange"):
        reports["statechange"] = statechange_metrics(pred_questions, gold_questions, average)
        write_report(
            reports["statechange"],
            os.path.join(out_dir, "statechange_report.tsv"),
            os.path.join(out_dir, "statechange_report.txt"),
            "state-change task",
        )
    render_metrics_figure(reports, os.path.join(out_dir, "metrics.png"))
    for task, report in reports.items():
        print(f"{task}: P={report.precision:.4f} R={report.recall:.4f} F1={report.f1:.4f}")
    return 0


def cmd_export_dot(opts: dict) -> int:
    corpus = load_corpus(opts["corpus"])
    out_dir = opts["out"]
    os.makedirs(out_dir, exist_ok=True)
    written = 0
    for process in corpus.processes:
        graph = process.gold_graph
        if graph is None and process.gold_matrix is not None:
            graph = derive_graph(process, process.gold_matrix, DeriveMode.MENTION_OR_CHANGE)
        if graph is None:
            print(f"warning: {process.id}: no graph to export, skipped", file=sys.stderr)
            continue
        atomic_write_text(os.path.join(out_dir, f"{process.id}.dot"), export_dot(graph, process))
        written += 1
    print(f"exported {written} graph(s) into {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="procdep",
        description="State-change and dependency-graph prediction for procedural text.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--corpus", help="canonical corpus file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int, help="worker pool size")
    decoder = argparse.ArgumentParser(add_help=False)
    decoder.add_argument("--provider", help="lexical | file | file:<path>")
    decoder.add_argument("--logits", help="logits TSV for the file provider")
    decoder.add_argument("--priors", help="topic prior table TSV")
    decoder.add_argument("--edge-scores", dest="edge_scores", help="edge score table TSV")
    decoder.add_argument("--lambda", dest="lambda_", type=float,
                         help="state-change vs graph weight")
    decoder.add_argument("--alpha", type=float, help="logit vs topic-prior weight")
    decoder.add_argument("--beta", type=float, help="connectivity vs edge-prior weight")
    decoder.add_argument("--c", type=float, help="purpose bonus in (0, 1)")
    decoder.add_argument("--beam", type=int, help="beam width")
    decoder.add_argument("--cap", type=int, help="per-step candidate cap")
    decoder.add_argument("--no-g-edge", action="store_true", help="drop the connectivity term")
    decoder.add_argument("--no-g-kb", action="store_true", help="drop the edge-prior term")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="validate a corpus file")
    derive = sub.add_parser("derive", parents=[common], help="derive graphs from gold matrices")
    derive.add_argument("--dot", action="store_true", help="also write DOT files")
    sub.add_parser("decode", parents=[common, decoder], help="decode matrices and graphs")
    evalp = sub.add_parser("eval", parents=[common], help="evaluate predictions against gold")
    evalp.add_argument("--pred", required=True, help="predictions corpus file")
    evalp.add_argument("--gold", required=True, help="gold corpus file")
    evalp.add_argument("--average", choices=("micro", "macro"), help="aggregation mode")
    evalp.add_argument("--tasks", choices=("both", "dependency", "statechange"),
                       default="both", help="which task(s) to evaluate")
    sub.add_parser("export-dot", parents=[common], help="export graphs as DOT files")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        opts = merge_options(args)
        if args.command != "eval" and not opts["corpus"]:
            raise ConfigError("--corpus (or a config file with corpus=) is required")
        if args.command == "validate":
            return cmd_validate(opts)
        if args.command == "derive":
            return cmd_derive(opts)
        if args.command == "decode":
            return cmd_decode(opts)
        if args.command == "eval":
            return cmd_eval(opts, args.pred, args.gold, args.tasks)
        if args.command == "export-dot":
            return cmd_export_dot(opts)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ValidationError, ProcessMismatch, NormalizationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, ConfigError, TooLarge, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ProcdepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
