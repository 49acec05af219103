"""Command-line entry point: ``python -m crossfuse --features X.csv --clusters 3 --k 5``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import CrossfuseError
from .experiment import ExperimentConfig, export_results, train
from .model import ABLATIONS


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="crossfuse",
        description="Cluster samples with the attention-fused content/graph auto-encoder.")
    data = p.add_argument_group("data")
    data.add_argument("--features", required=True, help="CSV, one sample per row")
    data.add_argument("--labels", help="one non-negative integer label per line")
    data.add_argument("--graph", help="edge list of 0-based node ids")
    data.add_argument("--similarity", choices=("heat", "inner"), default="heat",
                      help="kernel for the KNN graph when no --graph is given")
    data.add_argument("--k", type=int, help="neighbours per node for the KNN graph")
    data.add_argument("--heat-t", type=float, help="heat kernel scale (default: median heuristic)")

    model = p.add_argument_group("model")
    model.add_argument("--clusters", type=int, required=True)
    model.add_argument("--dims", type=_int_list,
                       help="layer widths, either all of them or the hidden ones only "
                            "(default: 500,10,C,500,500)")
    model.add_argument("--heads", type=int, default=8)
    model.add_argument("--gamma", type=float, default=0.5)

    fit = p.add_argument_group("training")
    fit.add_argument("--lr", type=float, default=0.001)
    fit.add_argument("--pretrain-epochs", type=int, default=50)
    fit.add_argument("--epochs", type=int, default=200)
    fit.add_argument("--kmeans-iters", type=int, default=1000)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--ablation", choices=ABLATIONS, default="full")

    p.add_argument("--out", help="directory for metrics, assignments, embeddings and losses")
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    return p


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    return ExperimentConfig(
        features=args.features, clusters=args.clusters, labels=args.labels, graph=args.graph,
        similarity=args.similarity, k=args.k, heat_t=args.heat_t, dims=args.dims,
        heads=args.heads, gamma=args.gamma, lr=args.lr, pretrain_epochs=args.pretrain_epochs,
        epochs=args.epochs, kmeans_iters=args.kmeans_iters, seed=args.seed,
        ablation=args.ablation, out=args.out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    config = config_from_args(args)
    try:
        report = train(config)
        if config.out:
            export_results(report, config.out)
    except (CrossfuseError, OSError) as exc:
        print(f"crossfuse: error: {exc}", file=sys.stderr)
        return 1

    summary = {"epochs": len(report.losses), "ablation": config.ablation}
    if report.losses:
        summary["final_total_loss"] = report.losses[-1]["total"]
    if report.metrics:
        summary.update(report.metrics)
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
