"""Command-line driver: train, export-logits, export-edge-scores."""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional

import torch

from .data import Vocabulary, load_processes
from .export import export_edge_scores, export_logits
from .model import CellEncoder, EdgeScoreModel, EncoderSpec
from .train import TrainConfig, TrainedEncoder, train_edge_scorer, train_encoder


def _save_artifact(trained: TrainedEncoder, out_dir: str,
                   edge_model: Optional[EdgeScoreModel]) -> None:
    os.makedirs(out_dir, exist_ok=True)
    torch.save(trained.model.state_dict(), os.path.join(out_dir, "encoder.pt"))
    with open(os.path.join(out_dir, "vocab.json"), "w", encoding="utf-8") as handle:
        handle.write(trained.vocab.to_json())
    with open(os.path.join(out_dir, "spec.json"), "w", encoding="utf-8") as handle:
        handle.write(trained.spec.to_json())
    with open(os.path.join(out_dir, "metrics.log"), "w", encoding="utf-8") as handle:
        handle.write("\n".join(trained.metrics_log) + "\n")
    if edge_model is not None:
        torch.save(edge_model.state_dict(), os.path.join(out_dir, "edge_scorer.pt"))


def _load_artifact(model_dir: str) -> TrainedEncoder:
    with open(os.path.join(model_dir, "spec.json"), encoding="utf-8") as handle:
        spec = EncoderSpec.from_json(handle.read())
    with open(os.path.join(model_dir, "vocab.json"), encoding="utf-8") as handle:
        vocab = Vocabulary.from_json(handle.read())
    model = CellEncoder(len(vocab), spec)
    model.load_state_dict(torch.load(os.path.join(model_dir, "encoder.pt"),
                                     weights_only=True))
    model.eval()
    with open(os.path.join(model_dir, "metrics.log"), encoding="utf-8") as handle:
        log = handle.read().splitlines()
    return TrainedEncoder(model, vocab, spec, log)


def _load_edge_model(model_dir: str, vocab: Vocabulary, spec: EncoderSpec) -> EdgeScoreModel:
    model = EdgeScoreModel(len(vocab), spec)
    model.load_state_dict(torch.load(os.path.join(model_dir, "edge_scorer.pt"),
                                     weights_only=True))
    model.eval()
    return model


def cmd_train(args) -> int:
    processes = load_processes(args.corpus)
    config = TrainConfig(
        epochs=args.epochs,
        learning_rate=args.lr,
        seed=args.seed,
        dev_fraction=args.dev_fraction,
        aux_weight=args.theta,
    )
    aux = load_processes(args.aux_corpus) if args.aux_corpus else None
    trained = train_encoder(processes, EncoderSpec(), config, aux)
    edge_model = None
    if args.edges:
        edge_model = train_edge_scorer(processes, trained.vocab, trained.spec, config)
    _save_artifact(trained, args.out, edge_model)
    print(trained.metrics_log[-1])
    print(f"saved model artifact to {args.out}")
    return 0


def cmd_export_logits(args) -> int:
    trained = _load_artifact(args.model)
    processes = load_processes(args.corpus)
    count = export_logits(trained, processes, args.out, locations=args.locations)
    print(f"wrote {count} logits rows to {args.out}")
    return 0


def cmd_export_edge_scores(args) -> int:
    processes = load_processes(args.corpus)
    if args.default:
        count = export_edge_scores(None, None, processes, args.out)
    else:
        trained = _load_artifact(args.model)
        edge_model = _load_edge_model(args.model, trained.vocab, trained.spec)
        count = export_edge_scores(edge_model, trained.vocab, processes, args.out)
    print(f"wrote {count} edge score rows to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="procdep-trainer",
        description="Train the sentence-entity encoder and export decoder tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train the encoder on a canonical corpus")
    train.add_argument("--corpus", required=True)
    train.add_argument("--out", required=True, help="model artifact directory")
    train.add_argument("--epochs", type=int, default=200)
    train.add_argument("--lr", type=float, default=0.2)
    train.add_argument("--seed", type=int, default=13)
    train.add_argument("--dev-fraction", type=float, default=0.0)
    train.add_argument("--theta", type=float, default=1.0,
                       help="loss weight of main-corpus samples vs auxiliary ones")
    train.add_argument("--aux-corpus", help="optional auxiliary corpus")
    train.add_argument("--edges", action="store_true", help="also train the edge scorer")

    logits = sub.add_parser("export-logits", help="write the decoder logits TSV")
    logits.add_argument("--model", required=True)
    logits.add_argument("--corpus", required=True)
    logits.add_argument("--out", required=True)
    logits.add_argument("--locations", choices=("none", "lexical"), default="none")

    edges = sub.add_parser("export-edge-scores", help="write the edge score TSV")
    edges.add_argument("--model", help="model artifact directory (with edge_scorer.pt)")
    edges.add_argument("--corpus", required=True)
    edges.add_argument("--out", required=True)
    edges.add_argument("--default", action="store_true",
                       help="emit the default score for every candidate")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            return cmd_train(args)
        if args.command == "export-logits":
            return cmd_export_logits(args)
        if args.command == "export-edge-scores":
            if not args.default and not args.model:
                raise ValueError("export-edge-scores needs --model or --default")
            return cmd_export_edge_scores(args)
        raise ValueError(f"unknown command {args.command!r}")
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
