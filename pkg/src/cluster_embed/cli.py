"""Command-line front end.

Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import data as gen
from . import metrics, tsne
from .dissim import DataMatrix
from .errors import ClusterEmbedError, ParseError
from .persist import load_embedding_csv, save_embedding_csv
from .pipeline import ConfigError, compute_dissimilarity, parse_config, run_pipeline
from .plot import write_svg

logger = logging.getLogger("cluster_embed")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _planar_default():
    return [(150, (-4.0, 0.0), 0.6), (150, (0.0, 2.5), 0.6), (150, (4.0, 0.0), 0.6)]


def cmd_generate(args) -> int:
    if args.kind == "gmm":
        dm = gen.gen_gmm(args.d, args.points, args.seed)
    elif args.kind in ("planar", "half-cylinder"):
        spec = _planar_default()
        if args.clusters:
            try:
                spec = [(int(c), tuple(map(float, ctr)), float(s)) for c, ctr, s in json.loads(args.clusters)]
            except (ValueError, TypeError) as exc:
                raise UsageError(f"--clusters must be a JSON list of [count, [cx, cy], spread]: {exc}")
        dm = gen.gen_planar_clusters(spec, args.seed, background=args.background)
        if args.kind == "half-cylinder":
            dm = gen.gen_half_cylinder(dm, args.radius)
    else:  # argparse restricts choices; kept for direct calls
        raise UsageError(f"unknown kind {args.kind!r}")
    gen.save_csv(dm, args.out)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}")
    cfg = parse_config(raw, base_dir=os.path.dirname(os.path.abspath(args.config)))
    if args.output_dir:
        cfg.output_dir = args.output_dir
    results = run_pipeline(cfg)
    for r in results:
        print(f"seed {r.seed}: alpha={r.embedding.alpha_used:.4f} stress={r.embedding.final_stress:.6g} "
              f"-> {cfg.output_dir}")
    return EXIT_OK


def _load_original(path, label_column):
    try:
        return gen.load_csv(path, label_column)
    except ParseError as exc:
        raise UsageError(str(exc))


def cmd_metrics(args) -> int:
    orig = _load_original(args.original, args.label_column)
    index, cluster, coords = load_embedding_csv(args.embedding)
    if index.max() >= orig.n or index.min() < 0 or (len(index) != orig.n and not args.subset):
        raise UsageError(f"embedding has {len(index)} rows but the original data has {orig.n} points "
                         "(pass --subset to evaluate an embedding of a subset)")
    sub = orig.subset(index)
    spec = {"kind": args.dissimilarity, "k": args.k}
    delta = compute_dissimilarity(orig, spec).submatrix(index) if args.dissimilarity == "geodesic" \
        else compute_dissimilarity(sub, spec)
    k_list = [int(k) for k in args.k_list.split(",")] if args.k_list else [5, 10, 20]
    report = metrics.evaluate(delta, coords, sub.labels, k_list,
                              assignment=cluster if sub.labels is not None and args.rand else None)
    text = report.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_tsne(args) -> int:
    if args.gradient_check:
        err = tsne.gradient_check(n=10, seed=args.seed)
        print(f"max relative gradient error: {err:.3e}")
        return EXIT_OK if err <= 1e-4 else EXIT_RUNTIME
    if not args.input or not args.out:
        raise UsageError("--input and --out are required unless --gradient-check is given")
    dm = _load_original(args.input, args.label_column)
    if not 2 <= args.perplexity <= dm.n - 1:
        raise UsageError(f"perplexity must be in [2, {dm.n - 1}] for {dm.n} points, got {args.perplexity}")
    init = None
    if args.init_coords:
        _, _, init = load_embedding_csv(args.init_coords)
        if init.shape[0] != dm.n:
            raise UsageError("initial coordinates do not match the number of points")
    cfg = tsne.TsneConfig(perplexity=args.perplexity, iters=args.iters, seed=args.seed,
                          exaggeration=args.exaggeration, exaggeration_iters=args.exaggeration_iters,
                          learning_rate=args.learning_rate,
                          init=tsne.GIVEN if init is not None else tsne.GAUSSIAN)
    aff = tsne.calibrate_affinities(dm, args.perplexity)
    y = tsne.tsne_run(aff, cfg, init)
    labels = dm.labels if dm.labels is not None else np.zeros(dm.n, dtype=int)
    save_embedding_csv(args.out, y, np.arange(dm.n), labels)
    return EXIT_OK


def cmd_plot(args) -> int:
    try:
        index, cluster, coords = load_embedding_csv(args.embedding)
    except ParseError as exc:
        raise UsageError(str(exc))
    labels = cluster
    if args.labels:
        orig = _load_original(args.labels, args.label_column)
        if orig.labels is None:
            raise UsageError("--labels file needs a label column (see --label-column)")
        labels = orig.labels[index]
    write_svg(args.out, coords, labels, title=args.title or os.path.basename(args.embedding))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cluster-embed", description="Cluster, embed each cluster, align.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset as CSV")
    g.add_argument("kind", choices=["gmm", "planar", "half-cylinder"])
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--d", type=int, default=10, help="GMM dimension (= number of components)")
    g.add_argument("--points", type=int, default=200, help="GMM points per component")
    g.add_argument("--clusters", help="JSON list of [count, [cx, cy], spread] for planar data")
    g.add_argument("--background", type=int, default=0, help="uniform background points (label -1)")
    g.add_argument("--radius", type=float, default=None, help="half-cylinder radius")
    g.set_defaults(func=cmd_generate)

    pl = sub.add_parser("pipeline", help="run cluster -> embed -> align from a JSON config")
    pl.add_argument("config")
    pl.add_argument("--output-dir", default=None)
    pl.set_defaults(func=cmd_pipeline)

    m = sub.add_parser("metrics", help="evaluate an embedding against the original data")
    m.add_argument("original")
    m.add_argument("embedding")
    m.add_argument("--label-column", default=None)
    m.add_argument("--k-list", default="5,10,20")
    m.add_argument("--dissimilarity", choices=["euclidean", "geodesic"], default="euclidean")
    m.add_argument("--k", type=int, default=10, help="kNN graph size for geodesic dissimilarities")
    m.add_argument("--subset", action="store_true", help="allow embeddings of a subset of the points")
    m.add_argument("--rand", action="store_true", help="also report the Rand index of the cluster column")
    m.add_argument("--out", default=None)
    m.set_defaults(func=cmd_metrics)

    t = sub.add_parser("tsne", help="exact t-SNE baseline")
    t.add_argument("--input")
    t.add_argument("--out")
    t.add_argument("--label-column", default=None)
    t.add_argument("--perplexity", "-u", type=float, default=30.0)
    t.add_argument("--iters", type=int, default=1000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--exaggeration", type=float, default=12.0)
    t.add_argument("--exaggeration-iters", type=int, default=250)
    t.add_argument("--learning-rate", type=float, default=200.0)
    t.add_argument("--init-coords", default=None)
    t.add_argument("--gradient-check", action="store_true")
    t.set_defaults(func=cmd_tsne)

    pt = sub.add_parser("plot", help="SVG scatter plot of an embedding CSV")
    pt.add_argument("embedding")
    pt.add_argument("--out", required=True)
    pt.add_argument("--labels", default=None, help="data CSV whose label column colours the points")
    pt.add_argument("--label-column", default="label")
    pt.add_argument("--title", default=None)
    pt.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ClusterEmbedError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
