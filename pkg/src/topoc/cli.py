"""Command-line entry point: ``topoc <subcommand> ...``.

Exit codes: 0 success, 1 input error, 2 partial failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .filtration import build_filtration
from .image_io import CHANNELS, ImageFormatError, extract_channel, load_image
from .mlkit import GbtHyperparams, GbtModel, compute_metrics, predict_proba
from .persistence import compute_pd, diagrams_to_json
from .vectorize import class_band_curves, emit_betti_svg, topo_feature_vector
from .verification import reduce_boundary_matrix

EXIT_OK, EXIT_INPUT, EXIT_PARTIAL = 0, 1, 2

log = logging.getLogger("topoc")


def _add_hyperparams(p):
    d = GbtHyperparams()
    p.add_argument("--learning-rate", type=float, default=d.learning_rate)
    p.add_argument("--max-depth", type=int, default=d.max_depth)
    p.add_argument("--n-estimators", type=int, default=d.n_estimators)
    p.add_argument("--subsample", type=float, default=d.subsample)
    p.add_argument("--colsample", type=float, default=d.colsample_per_tree)
    p.add_argument("--seed", type=int, default=d.seed)


def _hyperparams(args) -> GbtHyperparams:
    return GbtHyperparams(
        learning_rate=args.learning_rate,
        max_depth=args.max_depth,
        n_estimators=args.n_estimators,
        subsample=args.subsample,
        colsample_per_tree=args.colsample,
        seed=args.seed,
    )


def cmd_extract(args):
    pipeline.extract_dataset(args.manifest, args.output, args.workers, args.superlevel, args.log)
    return EXIT_OK


def cmd_diagram(args):
    img = load_image(args.image)
    f = build_filtration(extract_channel(img, args.channel), "superlevel" if args.superlevel else "sublevel")
    pds = compute_pd(f)
    if args.oracle:
        oracle = reduce_boundary_matrix(f)
        if oracle != pds:
            log.error("oracle and engine diagrams disagree")
            Path(args.output).write_text(diagrams_to_json(oracle))
            return EXIT_PARTIAL
        pds = oracle
        log.info("oracle agrees with the engine")
    Path(args.output).write_text(diagrams_to_json(pds))
    return EXIT_OK


def cmd_vectorize(args):
    vec = topo_feature_vector(load_image(args.image), superlevel=args.superlevel)
    pipeline.write_feature_csv(args.output, [args.label], vec.values[None, :])
    return EXIT_OK


def cmd_train(args):
    labels, X = pipeline.read_feature_csv(args.features)
    model, ranking = pipeline.train_top_k(X, labels, args.k, _hyperparams(args))
    Path(args.output).write_text(model.to_json())
    if args.ranking:
        with open(args.ranking, "w") as fh:
            fh.write("rank,feature,gain\n")
            for r, (j, g) in enumerate(ranking, start=1):
                fh.write(f"{r},{j},{g!r}\n")
    return EXIT_OK


def cmd_predict(args):
    try:
        model = GbtModel.from_json(Path(args.model).read_text())
    except (OSError, ValueError, KeyError) as exc:
        raise pipeline.InputError(f"cannot load model {args.model}: {exc}") from None
    labels, X = pipeline.read_feature_csv(args.features)
    proba = predict_proba(model, X)
    pipeline.write_predictions(args.output, labels, proba, [str(c) for c in model.classes])
    return EXIT_OK


def cmd_metrics(args):
    labels, proba, classes = pipeline.read_predictions(args.predictions)
    positive = args.positive or pipeline.default_positive(classes)
    report = compute_metrics(labels, proba, classes, positive)
    out = {"classes": classes, "positive_class": positive if len(classes) == 2 else None, **report.to_dict()}
    Path(args.output).write_text(json.dumps(out, indent=1) + "\n")
    return EXIT_OK


def cmd_plot(args):
    labels, X = pipeline.read_feature_csv(args.features)
    curves = class_band_curves(X, labels, args.channel, args.dim, args.band)
    emit_betti_svg(curves, args.output)
    return EXIT_OK


def cmd_experiment(args):
    config = pipeline.ExperimentConfig.from_json(args.config)
    if args.workers:
        config.workers = args.workers
    report = pipeline.run_experiment(config)
    Path(args.output).write_text(json.dumps(report, indent=1) + "\n")
    print(report["table_markdown"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topoc", description="Topological image features and boosted-tree classification")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="feature matrix for every image in a manifest")
    p.add_argument("manifest")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--superlevel", action="store_true", help="append superlevel Betti blocks (800 columns)")
    p.add_argument("--log", default=None, help="extraction log path (default: <output>.log.json)")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("diagram", help="persistence diagrams of one channel")
    p.add_argument("image")
    p.add_argument("--channel", choices=CHANNELS, default="gray")
    p.add_argument("--superlevel", action="store_true")
    p.add_argument("--oracle", action="store_true", help="cross-check against dense boundary reduction")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_diagram)

    p = sub.add_parser("vectorize", help="400-dim feature vector of one image")
    p.add_argument("image")
    p.add_argument("--label", default="")
    p.add_argument("--superlevel", action="store_true")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_vectorize)

    p = sub.add_parser("train", help="train a boosted-tree model on the top-k features")
    p.add_argument("features")
    p.add_argument("--k", type=int, default=400)
    p.add_argument("--ranking", default=None, help="also write the feature ranking CSV")
    p.add_argument("-o", "--output", required=True)
    _add_hyperparams(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="class probabilities for a feature matrix")
    p.add_argument("model")
    p.add_argument("features")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("metrics", help="metrics report from a predictions file")
    p.add_argument("predictions")
    p.add_argument("--positive", default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("plot", help="per-class median Betti curves with quantile bands (SVG)")
    p.add_argument("features")
    p.add_argument("--channel", choices=CHANNELS, default="gray")
    p.add_argument("--dim", type=int, choices=(0, 1), default=0)
    p.add_argument("--band", type=float, default=0.40)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("experiment", help="feature-count ablation from a JSON config")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except pipeline.PartialFailure as exc:
        print(f"topoc: partial failure: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    except (pipeline.InputError, ImageFormatError, ValueError, OSError) as exc:
        print(f"topoc: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
