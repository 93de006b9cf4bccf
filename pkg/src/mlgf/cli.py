"""``mlgf`` command line.

Exit codes: 0 success, 2 calibration failure, 64 usage error, 65 data shape
error, 66 unreadable input.
"""

import argparse
import hashlib
import json
import logging
import math
import shlex
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from ._rng import derive_seed, resolve_threads
from .edgegen import (DEFAULT_ALPHA_GRID, DEFAULT_B_GRID_DESC, AttachmentParams, CalibrationError,
                      HomophilyCalibrator, attach_edges, paired_sweep, sweep_alpha, sweep_b)
from .evaluation import degenerate_audit, evaluate
from .io import (BundleError, DatasetBundle, FeatureDegrader, load_bundle, make_meta,
                 make_splits, read_labels, read_scores, read_split, save_bundle,
                 write_split, write_sweep_csv)
from .labelgen import LabelGenConfig, generate_multilabel_data
from .metrics import STATS_COLUMNS, ccns, dataset_statistics, label_homophily

logger = logging.getLogger("mlgf")

EXIT_OK, EXIT_CALIBRATION, EXIT_USAGE, EXIT_DATA, EXIT_NOINPUT = 0, 2, 64, 65, 66
MANIFEST_NAME = "run_manifest.json"


class UsageError(Exception):
    pass


class DataShapeError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_grid(text):
    """``start:stop:step`` (inclusive of ``stop`` within 1e-9) or a comma list."""
    text = text.strip()
    if ":" in text:
        try:
            start, stop, step = (float(t) for t in text.split(":"))
        except ValueError:
            raise UsageError(f"bad grid {text!r}; expected start:stop:step") from None
        if step == 0:
            raise UsageError("grid step must be non-zero")
        count = math.floor((stop - start) / step + 1e-9) + 1
        values = [round(start + k * step, 12) for k in range(max(count, 0))]
    else:
        try:
            values = [float(t) for t in text.split(",") if t.strip()]
        except ValueError:
            raise UsageError(f"bad grid {text!r}") from None
    if not values:
        raise UsageError(f"grid {text!r} is empty")
    return values


def _fmt(value):
    if value is None:
        return "N.A."
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def bundle_digest(directory):
    """SHA-256 over every bundle file (the run manifest is excluded)."""
    directory = Path(directory)
    h = hashlib.sha256()
    for path in sorted(p for p in directory.rglob("*") if p.is_file()):
        if path.name == MANIFEST_NAME:
            continue
        h.update(path.relative_to(directory).as_posix().encode())
        h.update(b"\0")
        h.update(path.read_bytes())
    return h.hexdigest()


def _write_manifest(out_dir, args, argv, config, seeds, inputs, outputs, started):
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "command_line": "mlgf " + " ".join(shlex.quote(a) for a in argv),
        "config": config,
        "seeds": seeds,
        "tool_version": __version__,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "started_at": started.isoformat(),
        "wall_clock_seconds": round(time.monotonic() - args._t0, 3),
    }
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return out_dir / MANIFEST_NAME


def _labelgen_config(args, seed):
    return LabelGenConfig(n_points=args.nodes, n_labels=args.labels, n_features=args.dim,
                          r_min=args.r_min, r_max=args.r_max, seed=seed)


def _check_labelgen_args(args):
    if args.nodes < 2:
        raise UsageError("--nodes must be >= 2")
    if args.labels < 1 or args.dim < 1:
        raise UsageError("--labels and --dim must be >= 1")
    if not 0 < args.r_min <= args.r_max < 1:
        raise UsageError("radius bounds must satisfy 0 < --r-min <= --r-max < 1")


def cmd_generate(args, argv):
    _check_labelgen_args(args)
    if args.out is None:
        raise UsageError("generate needs --out")
    target = args.target_homophily
    if target is not None:
        if not 0 <= target <= 1:
            raise UsageError(f"--target-homophily must lie in [0, 1], got {target}")
    elif args.alpha is None or args.b is None:
        raise UsageError("give --alpha and --b, or --target-homophily")
    else:
        try:
            AttachmentParams(args.alpha, args.b)
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    threads = resolve_threads(args.threads)
    label_seed = derive_seed(args.seed, "labelgen")
    graph_seed = derive_seed(args.seed, "graph")
    _, X, Y = generate_multilabel_data(_labelgen_config(args, label_seed), threads=threads)
    provenance = {"r_min": args.r_min, "r_max": args.r_max, "label_seed": label_seed,
                  "graph_seed": graph_seed}
    if target is not None:
        cal = HomophilyCalibrator(target_homophily=target, n_seeds=args.calibration_seeds,
                                  subsample=min(args.calibration_subsample, args.nodes),
                                  refine=args.refine, random_state=args.seed)
        try:
            cal.fit(Y, threads=threads)
        except CalibrationError as exc:
            print(f"calibration failed: {exc}", file=sys.stderr)
            return EXIT_CALIBRATION
        params = cal.params_
        provenance.update(target_homophily=target, calibrated_homophily=cal.achieved_homophily_)
        logger.info("calibrated alpha=%g b=%g (subsample homophily %.4f)", params.alpha,
                    params.b, cal.achieved_homophily_)
    else:
        params = AttachmentParams(args.alpha, args.b)
    graph = attach_edges(Y, params, seed=graph_seed, threads=threads)
    provenance["homophily"] = label_homophily(graph, Y)
    meta = make_meta(n=args.nodes, C=args.labels, D=args.dim, seed=args.seed,
                     alpha=params.alpha, b=params.b, provenance=provenance)
    bundle = DatasetBundle(graph=graph, labels=Y, features=None if args.identity_features else X,
                           identity_features=args.identity_features, meta=meta)
    splits = make_splits(args.nodes, k=args.splits, seed=derive_seed(args.seed, "splits")) \
        if args.splits else None
    written = save_bundle(bundle, args.out, splits=splits)
    _write_manifest(args.out, args, argv,
                    {"nodes": args.nodes, "labels": args.labels, "dim": args.dim,
                     "r_min": args.r_min, "r_max": args.r_max, "alpha": params.alpha,
                     "b": params.b, "target_homophily": target, "splits": args.splits},
                    {"seed": args.seed, "labelgen": label_seed, "graph": graph_seed},
                    [], written, args._started)
    print(f"wrote {args.out}: n={graph.n} |E|={graph.n_edges} "
          f"homophily={_fmt(provenance['homophily'])} alpha={_fmt(params.alpha)} b={_fmt(params.b)}")
    return EXIT_OK


def cmd_sweep(args, argv):
    threads = resolve_threads(args.threads)
    if args.bundle:
        Y = _load(args.bundle).labels
    else:
        _check_labelgen_args(args)
        _, _, Y = generate_multilabel_data(
            _labelgen_config(args, derive_seed(args.seed, "labelgen")), threads=threads)
    if args.seeds < 1:
        raise UsageError("--seeds must be >= 1")
    seeds = [derive_seed(args.seed, "sweep", k) for k in range(args.seeds)]
    subsample = min(args.subsample, Y.shape[0])
    kw = dict(seeds=seeds, subsample=subsample, threads=threads,
              subsample_seed=derive_seed(args.seed, "subsample"))
    try:
        if args.sweep == "alpha":
            grid = parse_grid(args.grid or "0:10:0.5")
            curve = sweep_alpha(Y, args.b if args.b is not None else 0.05, grid, **kw)
        elif args.sweep == "b":
            grid = parse_grid(args.grid or "0.0125:0.25:0.0125")
            curve = sweep_b(Y, args.alpha if args.alpha is not None else 5.0, grid, **kw)
        else:
            ag = parse_grid(args.alpha_grid) if args.alpha_grid else list(DEFAULT_ALPHA_GRID)
            bg = parse_grid(args.b_grid) if args.b_grid else list(DEFAULT_B_GRID_DESC)
            if len(ag) != len(bg):
                raise UsageError(f"--alpha-grid has {len(ag)} values, --b-grid has {len(bg)}")
            curve = paired_sweep(Y, ag, bg, **kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_sweep_csv(out, curve)
        _write_manifest(out.parent, args, argv,
                        {"sweep": args.sweep, "grid": args.grid, "alpha_grid": args.alpha_grid,
                         "b_grid": args.b_grid, "subsample": subsample},
                        {"seed": args.seed, "sweep": seeds}, [args.bundle] if args.bundle else [],
                        [out], args._started)
    else:
        print("alpha,b,homophily_mean,homophily_std,edge_density_mean")
        for row in curve.rows():
            print(",".join(_fmt(x) for x in row))
    return EXIT_OK


def _load(path):
    try:
        return load_bundle(path)
    except (BundleError, OSError) as exc:
        raise BundleError(f"cannot load bundle {path}: {exc}") from None


def write_stats_tsv(path, stats):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(STATS_COLUMNS) + "\n")
        fh.write("\t".join(_fmt(v) for v in stats.row()) + "\n")


def write_ccns_csv(path, matrix):
    values = np.asarray(matrix.values)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("label," + ",".join(str(c) for c in range(values.shape[1])) + "\n")
        for c, row in enumerate(values):
            fh.write(f"{c}," + ",".join(_fmt(v) for v in row) + "\n")


def cmd_analyze(args, argv):
    bundle = _load(args.bundle)
    out = Path(args.out) if args.out else Path(args.bundle) / "analysis"
    out.mkdir(parents=True, exist_ok=True)
    stats = dataset_statistics(bundle.graph, Y=bundle.labels, n_features=bundle.n_features,
                               clustering_variant=args.clustering)
    write_stats_tsv(out / "stats.tsv", stats)
    written = [out / "stats.tsv"]
    if bundle.n_labels:
        write_ccns_csv(out / "ccns.csv", ccns(bundle.graph, bundle.labels))
        written.append(out / "ccns.csv")
    _write_manifest(out, args, argv, {"clustering": args.clustering}, {}, [args.bundle], written,
                    args._started)
    print("\t".join(STATS_COLUMNS))
    print("\t".join(_fmt(v) for v in stats.row()))
    return EXIT_OK


def cmd_splits(args, argv):
    if args.bundle:
        n = _load(args.bundle).n
    elif args.nodes is not None:
        n = args.nodes
    else:
        raise UsageError("splits needs --bundle or --nodes")
    try:
        ratios = tuple(float(t) for t in args.ratios.split(","))
        splits = make_splits(n, ratios=ratios, k=args.k, seed=derive_seed(args.seed, "splits"))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out or args.bundle)
    (out / "splits").mkdir(parents=True, exist_ok=True)
    written = []
    for k, split in enumerate(splits):
        path = out / "splits" / f"split_{k}.tsv"
        write_split(path, split)
        written.append(path)
    _write_manifest(out / "splits", args, argv, {"n": n, "ratios": args.ratios, "k": args.k},
                    {"seed": args.seed}, [args.bundle] if args.bundle else [], written,
                    args._started)
    print(f"wrote {len(splits)} splits of n={n} to {out / 'splits'}")
    return EXIT_OK


def cmd_degrade(args, argv):
    if args.out is None:
        raise UsageError("degrade needs --out")
    if not 0 <= args.ratio <= 1:
        raise UsageError(f"--ratio must lie in [0, 1], got {args.ratio}")
    bundle = _load(args.bundle)
    if bundle.features is None:
        raise DataShapeError("bundle has no dense features to degrade")
    seed = derive_seed(args.seed, "degrade")
    deg = FeatureDegrader(args.ratio, drop_columns=args.drop_columns, random_state=seed)
    X = deg.fit_transform(bundle.features)
    meta = dict(bundle.meta)
    prov = dict(meta.get("provenance") or {})
    prov.update(relevant_ratio=args.ratio, degrade_seed=seed,
                degrade_mode="drop" if args.drop_columns else "uniform-noise",
                kept_rule="prefix, round-half-up(ratio*D)")
    meta.update(kept_columns=deg.kept_columns_, provenance=prov)
    new = DatasetBundle(graph=bundle.graph, labels=bundle.labels, features=X, meta=meta)
    written = save_bundle(new, args.out, splits=None)
    _write_manifest(args.out, args, argv, {"ratio": args.ratio, "drop_columns": args.drop_columns},
                    {"seed": args.seed, "degrade": seed}, [args.bundle], written, args._started)
    print(f"kept {deg.kept_columns_} of {deg.n_features_in_} columns -> {args.out}")
    return EXIT_OK


def _read_eval_inputs(args):
    try:
        scores = read_scores(args.scores)
    except (BundleError, OSError) as exc:
        raise BundleError(f"cannot read scores: {exc}") from None
    n, C = scores.shape
    try:
        Y = read_labels(args.labels)
    except OSError as exc:
        raise BundleError(f"cannot read labels: {exc}") from None
    if Y.shape[0] != n or Y.shape[1] > C:
        raise DataShapeError(f"labels cover {Y.shape[0]} nodes / {Y.shape[1]} label ids, "
                             f"scores are {n} x {C}")
    Y = np.pad(Y, ((0, 0), (0, C - Y.shape[1])))
    return Y, scores


def _print_report(rep, percent, prefix=""):
    for key, value in rep.summary(percent).items():
        print(f"{prefix}{key}\t{_fmt(value)}")


def cmd_evaluate(args, argv):
    Y, scores = _read_eval_inputs(args)
    if args.split:
        split = read_split(args.split)
        if split.n != Y.shape[0]:
            raise DataShapeError(f"split covers {split.n} nodes, scores have {Y.shape[0]}")
        idx = getattr(split, args.part)
        Y, scores = Y[idx], scores[idx]
    rep = evaluate(Y, scores, threshold=args.threshold)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        scale = 100.0 if args.percent else 1.0
        with open(out / "report.tsv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("metric\tvalue\n")
            for key, value in rep.summary(args.percent).items():
                fh.write(f"{key}\t{_fmt(value)}\n")
            fh.write(f"threshold\t{_fmt(rep.threshold)}\n")
        with open(out / "per_class.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("label,auroc,ap\n")
            for c, (a, p) in enumerate(zip(rep.per_class_auroc, rep.per_class_ap)):
                fh.write(f"{c},{_fmt(a * scale)},{_fmt(p * scale)}\n")
        with open(out / "skipped.tsv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("label\tmetrics\treason\n")
            for c, metrics, reason in rep.skipped_classes:
                fh.write(f"{c}\t{metrics}\t{reason}\n")
    _print_report(rep, args.percent)
    if rep.skipped_classes:
        print(f"skipped {len(rep.skipped_classes)} classes", file=sys.stderr)
    return EXIT_OK


def cmd_audit(args, argv):
    try:
        Y = read_labels(args.labels, n_labels=args.n_labels)
    except OSError as exc:
        raise BundleError(f"cannot read labels: {exc}") from None
    audit = degenerate_audit(Y, threshold=args.threshold)
    lines = [f"unlabeled_fraction\t{_fmt(audit.unlabeled_fraction)}"]
    scale = 100.0 if args.percent else 1.0
    for name, rep in (("all_negative", audit.all_negative), ("has_label", audit.has_label)):
        for key, value in rep.summary(args.percent).items():
            lines.append(f"{name}\t{key}\t{_fmt(value)}")
        lines.append(f"{name}\tauroc_minus_ap\t{_fmt(audit.gaps[name] * scale)}")
    text = "\n".join(lines) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "audit.tsv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def replay_manifest(path, out=None):
    """Re-run the command recorded in a run manifest, optionally redirecting ``--out``."""
    manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    argv = list(manifest["argv"])
    if out is not None:
        if "--out" in argv:
            argv[argv.index("--out") + 1] = str(out)
        else:
            argv += ["--out", str(out)]
    return main(argv)


def cmd_replay(args, argv):
    return replay_manifest(args.manifest, out=args.out)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default $MLGF_THREADS or 1)")
    common.add_argument("--out", default=None, help="output path")
    common.add_argument("--percent", action="store_true", help="report metrics in percent")
    common.add_argument("-v", "--verbose", action="store_true")

    labelgen = argparse.ArgumentParser(add_help=False)
    labelgen.add_argument("--nodes", type=int, default=3000)
    labelgen.add_argument("--labels", type=int, default=20)
    labelgen.add_argument("--dim", type=int, default=32)
    labelgen.add_argument("--r-min", type=float, default=LabelGenConfig.r_min)
    labelgen.add_argument("--r-max", type=float, default=LabelGenConfig.r_max)

    parser = _Parser(prog="mlgf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mlgf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", parents=[common, labelgen],
                       help="generate a synthetic multi-label graph bundle")
    p.add_argument("--alpha", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--target-homophily", type=float)
    p.add_argument("--calibration-subsample", type=int, default=500)
    p.add_argument("--calibration-seeds", type=int, default=3)
    p.add_argument("--refine", type=int, default=6, help="bisection steps after the grid search")
    p.add_argument("--splits", type=int, default=0, help="also write this many random splits")
    p.add_argument("--identity-features", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("sweep", parents=[common, labelgen], help="alpha / b / paired parameter sweeps")
    p.add_argument("--sweep", choices=("alpha", "b", "paired"), required=True)
    p.add_argument("--bundle", help="take labels from this bundle instead of generating them")
    p.add_argument("--grid", help="start:stop:step or comma list")
    p.add_argument("--alpha", type=float, help="fixed alpha for --sweep b (default 5)")
    p.add_argument("--b", type=float, help="fixed b for --sweep alpha (default 0.05)")
    p.add_argument("--alpha-grid")
    p.add_argument("--b-grid")
    p.add_argument("--seeds", type=int, default=3, help="number of graph seeds per grid point")
    p.add_argument("--subsample", type=int, default=500)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", parents=[common], help="dataset statistics and CCNS")
    p.add_argument("bundle")
    p.add_argument("--clustering", choices=("local", "global"), default="local")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("splits", parents=[common], help="random train/val/test splits")
    p.add_argument("--bundle")
    p.add_argument("--nodes", type=int)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--ratios", default="0.6,0.2,0.2")
    p.set_defaults(func=cmd_splits)

    p = sub.add_parser("degrade", parents=[common], help="feature-quality variant of a bundle")
    p.add_argument("bundle")
    p.add_argument("--ratio", type=float, required=True, help="fraction of relevant columns kept")
    p.add_argument("--drop-columns", action="store_true",
                   help="delete irrelevant columns instead of replacing them with noise")
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("evaluate", parents=[common], help="score multi-label predictions")
    p.add_argument("--labels", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--split")
    p.add_argument("--part", choices=("train", "val", "test"), default="test")
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("audit", parents=[common], help="degenerate-predictor metric audit")
    p.add_argument("--labels", required=True)
    p.add_argument("--n-labels", type=int)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("replay", help="re-run a command from its run manifest")
    p.add_argument("manifest")
    p.add_argument("--out")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args._t0 = time.monotonic()
    args._started = datetime.now(timezone.utc)
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"mlgf {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataShapeError as exc:
        print(f"mlgf {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BundleError as exc:
        print(f"mlgf {args.command}: {exc}", file=sys.stderr)
        return EXIT_NOINPUT
    except ValueError as exc:
        if "shape" in str(exc) or "rows" in str(exc):
            print(f"mlgf {args.command}: {exc}", file=sys.stderr)
            return EXIT_DATA
        raise


if __name__ == "__main__":
    sys.exit(main())
