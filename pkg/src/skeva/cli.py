"""Command-line entry point.

Every clustering subcommand writes a labels file (one integer per line, input
order), an optional per-draw trace CSV, and an optional JSON run summary.
Identical command lines, seed included, produce byte-identical outputs.
Exit codes: 0 success, 1 runtime failure, 2 bad arguments or unparseable
input.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time

import numpy as np

from . import bench, dimsketch, divergence, kernelsketch
from .data import ParseError, load_dense, load_libsvm, standardize_features
from .kernels import parse_kernel
from .kmeans import KMeansConfig, best_of_restarts


def _add_io(p):
    p.add_argument("--in", dest="path", required=True, help="input data file")
    p.add_argument("--format", choices=("csv", "whitespace", "libsvm"), default="csv")
    p.add_argument("--points-as", choices=("rows", "cols"), default="rows",
                   help="orientation of dense input files")
    p.add_argument("--skip-header", type=int, default=0, metavar="N")
    p.add_argument("--dims", type=int, help="feature count (libsvm input only)")
    p.add_argument("--standardize", action="store_true",
                   help="z-score each feature before clustering (default off)")


def _add_out(p):
    p.add_argument("--out", required=True, help="labels output path")
    p.add_argument("--trace", help="per-draw trace CSV path")
    p.add_argument("--summary", help="JSON run summary path")
    p.add_argument("--ref", help="reference labels file; adds accuracy to the summary")


def _add_kmeans(p):
    p.add_argument("--K", dest="n_clusters", type=int, required=True)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1,
                   help="max concurrent draws; 1 runs fully sequentially")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="skeva", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic data set")
    g.add_argument("--D", type=int, required=True)
    g.add_argument("--N", type=int, required=True)
    g.add_argument("--K", type=int, required=True)
    g.add_argument("--rank", type=int)
    g.add_argument("--side", type=float)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="CSV output, points as rows")
    g.add_argument("--labels-out", help="ground-truth labels path")

    km = sub.add_parser("kmeans", help="full K-means with restarts")
    for add in (_add_io, _add_out, _add_kmeans):
        add(km)

    sk = sub.add_parser("skeva", help="batch dimension sketching")
    for add in (_add_io, _add_out, _add_kmeans):
        add(sk)
    sk.add_argument("--d", type=int, required=True, help="sketch dimensions per draw")
    sk.add_argument("--daug", type=int, default=100, help="validation dimensions per draw")
    sk.add_argument("--R", type=int, default=10, help="number of draws")
    sk.add_argument("--rank-fn", choices=dimsketch.RANK_FUNCTIONS, default="fdr_weighted")

    ssk = sub.add_parser("seskeva", help="sequential dimension sketching")
    for add in (_add_io, _add_out, _add_kmeans):
        add(ssk)
    ssk.add_argument("--d", type=int, required=True)
    ssk.add_argument("--daug", type=int, default=100)
    ssk.add_argument("--R", type=int, default=10)
    ssk.add_argument("--rank-fn", choices=dimsketch.RANK_FUNCTIONS, default="fdr_weighted")
    ssk.add_argument("--epsilon", type=float, default=0.0,
                     help="stop augmenting once the score moves by at most this much")
    ssk.add_argument("--gradient-mode", choices=("accept", "abort"), default="accept")

    kk = sub.add_parser("keskeva", help="kernel clustering on point sketches")
    for add in (_add_io, _add_out, _add_kmeans):
        add(kk)
    kk.add_argument("--nu", type=int, required=True, help="sketch points per draw")
    kk.add_argument("--nuaug", type=int, default=100, help="validation points per draw")
    kk.add_argument("--R", type=int, default=10)
    kk.add_argument("--kernel", default="linear",
                    help="gaussian[:var] | linear | sigmoid[:alpha,bias]")

    dn = sub.add_parser("diskeva-n", help="divergence-selected point sketch")
    for add in (_add_io, _add_out, _add_kmeans):
        add(dn)
    dn.add_argument("--nu", type=int, required=True)
    dn.add_argument("--nuaug", type=int, default=100)
    dn.add_argument("--R", type=int, default=10)
    dn.add_argument("--var", type=float, default=1.0, help="Parzen kernel variance")
    dn.add_argument("--second-ref", choices=("holdout", "sketch"), default="holdout")

    dd = sub.add_parser("diskeva-d", help="divergence-selected dimension sketch")
    for add in (_add_io, _add_out, _add_kmeans):
        add(dd)
    dd.add_argument("--d", type=int, required=True)
    dd.add_argument("--daug", type=int, default=100)
    dd.add_argument("--R", type=int, default=10)
    dd.add_argument("--var", type=float, default=1.0)

    rp = sub.add_parser("rp", help="sign random-projection baseline")
    for add in (_add_io, _add_out, _add_kmeans):
        add(rp)
    rp.add_argument("--d", type=int, required=True, help="projected dimensions")
    rp.add_argument("--identity", action="store_true", help="debug: identity projection")

    be = sub.add_parser("bench", help="run an experiment config")
    be.add_argument("--config", required=True)
    be.add_argument("--report", required=True, help="per-cell CSV output")
    be.add_argument("--summary", help="JSON summary output")
    return ap


def _load(args) -> np.ndarray:
    if args.format == "libsvm":
        if not args.dims:
            raise ValueError("--dims is required for libsvm input")
        X, _ = load_libsvm(args.path, args.dims)
    else:
        X = load_dense(args.path, fmt=args.format, points_as=args.points_as,
                       skip_header=args.skip_header)
    if args.standardize:
        X = standardize_features(X)
    return X


def _write_labels(path, labels):
    with open(path, "w") as fh:
        fh.writelines(f"{int(v)}\n" for v in labels)


def _write_trace(path, rows):
    if not rows:
        return
    fields = list(dataclasses.asdict(rows[0]).keys())
    with open(path, "w") as fh:
        fh.write(",".join(fields) + "\n")
        for row in rows:
            d = dataclasses.asdict(row)
            fh.write(",".join("" if d[f] is None else str(d[f]) for f in fields) + "\n")


def _write_summary(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=float)
        fh.write("\n")


def _finish(args, labels, extra, trace_rows=None):
    _write_labels(args.out, labels)
    if args.trace and trace_rows is not None:
        _write_trace(args.trace, trace_rows)
    if args.summary:
        payload = {
            "command": args.command,
            "n_points": int(len(labels)),
            "n_clusters": int(args.n_clusters),
            "seed": int(args.seed),
            "labels_path": args.out,
        }
        payload.update(extra)
        if args.ref:
            with open(args.ref) as fh:
                ref = np.array([int(line.strip()) for line in fh if line.strip()])
            k = max(args.n_clusters, int(ref.max()) + 1)
            payload["accuracy_vs_ref"] = bench.relative_accuracy(labels, ref, k)
        _write_summary(args.summary, payload)


def _execute(args) -> int:
    if args.command == "gen":
        spec = bench.SynthSpec(args.D, args.N, args.K, rank=args.rank,
                               hypercube_side=args.side, seed=args.seed)
        X, truth = bench.gen_synthetic(spec)
        np.savetxt(args.out, X.T, delimiter=",", fmt="%.10g")
        if args.labels_out:
            _write_labels(args.labels_out, truth)
        return 0

    if args.command == "bench":
        with open(args.config) as fh:
            config = bench.parse_config(fh.read())
        report = bench.run_experiment(config)
        report.to_csv(args.report)
        if args.summary:
            report.to_json(args.summary)
        return 0

    X = _load(args)
    cfg = KMeansConfig(args.n_clusters, max_iter=args.max_iter,
                       restarts=args.restarts, tol=args.tol)
    t0 = time.perf_counter()
    if args.command == "kmeans":
        out = best_of_restarts(X, cfg, args.seed)
        labels, extra, trace = out.labels, {"objective": out.objective}, None
    elif args.command == "skeva":
        out = dimsketch.skeva_batch(X, args.n_clusters, args.d, args.daug, args.R,
                                    args.seed, rank=args.rank_fn, kmeans_cfg=cfg,
                                    threads=args.threads)
        labels = out.clustering.labels
        extra = {"winner_draw": out.winner, "distance_ops": out.distance_ops}
        trace = out.trace
    elif args.command == "seskeva":
        out = dimsketch.skeva_sequential(X, args.n_clusters, args.d, args.daug, args.R,
                                         args.seed, grad_tol=args.epsilon,
                                         rank=args.rank_fn, kmeans_cfg=cfg,
                                         gradient_mode=args.gradient_mode,
                                         threads=args.threads)
        labels = out.clustering.labels
        extra = {"winner_draw": out.winner, "distance_ops": out.distance_ops}
        trace = out.trace
    elif args.command == "keskeva":
        spec = parse_kernel(args.kernel, X.shape[0])
        out = kernelsketch.keskeva(X, args.n_clusters, args.nu, args.nuaug, args.R,
                                   spec, kmeans_cfg=cfg, seed=args.seed,
                                   threads=args.threads)
        labels, extra, trace = out.labels, {"winner_draw": out.winner}, out.trace
    elif args.command == "diskeva-n":
        out = divergence.diskeva_points(X, args.n_clusters, args.nu, args.nuaug,
                                        args.R, args.var, kmeans_cfg=cfg,
                                        seed=args.seed, second_ref=args.second_ref,
                                        threads=args.threads)
        labels = out.clustering.labels
        extra = {"winner_draw": out.winner, "fallback": out.fallback,
                 "objective": out.clustering.objective}
        trace = out.trace
    elif args.command == "diskeva-d":
        out = divergence.diskeva_dims(X, args.n_clusters, args.d, args.daug,
                                      args.R, args.var, kmeans_cfg=cfg,
                                      seed=args.seed, threads=args.threads)
        labels = out.clustering.labels
        extra = {"winner_draw": out.winner, "fallback": out.fallback}
        trace = out.trace
    elif args.command == "rp":
        out = bench.rp_kmeans_baseline(X, args.d, cfg, args.seed, identity=args.identity)
        labels, extra, trace = out.labels, {"objective": out.objective}, None
    else:  # pragma: no cover
        raise ValueError(f"unknown command {args.command!r}")
    extra["wall_ms"] = (time.perf_counter() - t0) * 1e3
    _finish(args, labels, extra, trace)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _execute(args)
    except (ParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
