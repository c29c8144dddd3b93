"""Command-line interface: ``mshosvd <command> [options]``.

Exit codes: 0 success, 2 unreadable or malformed input, 3 invalid
configuration, 4 a verification or internal invariant failed.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analysis import generate_synthetic, run_table4, run_table5
from .features import fit_features, knn1_classify, naive_bayes_classify, transform
from .io import FormatError, dump_json, load_tree, read_tensor, save_tree, write_tensor
from .partition import GroundTruth, KMeans, RandomPartitioner
from .tree import TreeConfig, build, cost_report, prune_sweep, reconstruct_tree
from .verify import FAULTS, algebra_suite, theory_suite

log = logging.getLogger("mshosvd")

EXIT_OK = 0
EXIT_IO = 2
EXIT_CONFIG = 3
EXIT_INVARIANT = 4


class ConfigError(ValueError):
    pass


def _int_tuple(text: str) -> tuple:
    try:
        vals = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise ConfigError("empty integer list")
    return vals


def _rank_list(text: str) -> tuple:
    """``2,2,2`` or one tuple per scale separated by ``;`` as in ``2,2,2;4,4,4``."""
    return tuple(_int_tuple(part) for part in text.split(";"))


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _load_input(args):
    """Input tensor plus ground-truth labels when they are known."""
    if args.synth is not None:
        if args.input is not None:
            raise ConfigError("give either --input or --synth, not both")
        x, truth = generate_synthetic(args.synth)
        return x, truth.labels
    if args.input is None:
        raise ConfigError("an input tensor is required (--input or --synth)")
    x = read_tensor(args.input)
    labels = None
    if getattr(args, "labels", None):
        labels = _read_labels(args.labels)
    return x, labels


def _read_labels(path):
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read labels from {path}: {exc}") from exc
    return data


def _partitioner(args, labels):
    if args.partitioner == "kmeans":
        return KMeans(args.seed)
    if args.partitioner == "random":
        return RandomPartitioner(args.seed)
    if labels is None:
        raise ConfigError("the ground-truth partitioner needs --synth or --labels")
    return GroundTruth(tuple(np.asarray(lab, dtype=np.int64) for lab in labels))


def _tree_config(args, shape, labels) -> TreeConfig:
    if args.clusters is None:
        clusters = (2,) * len(shape)
    else:
        clusters = _int_tuple(args.clusters)
    if (args.tau is None) == (args.ranks is None):
        raise ConfigError("give exactly one of --tau or --ranks")
    try:
        config = TreeConfig(
            clusters=clusters,
            max_scale=args.max_scale,
            tau=args.tau,
            ranks=None if args.ranks is None else _rank_list(args.ranks),
            partitioner=_partitioner(args, labels),
        )
        config.validate(shape)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return config


def _write_provenance(path: Path, command: str, args, extra: Optional[dict] = None):
    record = {"command": command, "version": __version__}
    for key, val in sorted(vars(args).items()):
        if key in ("func", "command"):
            continue
        record[key] = val
    if extra:
        record.update(extra)
    path.write_text(dump_json(record))


def _output_dir(args) -> Path:
    if args.output is None:
        raise ConfigError("--output is required")
    out = Path(args.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise FormatError(f"cannot create {out}: {exc}") from exc
    return out


def cmd_decompose(args) -> int:
    x, labels = _load_input(args)
    config = _tree_config(args, x.shape, labels)
    out = _output_dir(args)
    tree = build(x, config)
    report = cost_report(tree, x)
    save_tree(tree, out)
    (out / "report.json").write_text(
        dump_json({**report.to_dict(), "nodes": len(tree.nodes())})
    )
    _write_provenance(out / "config.json", "decompose", args, {"tree": config.to_dict()})
    print(f"nodes={len(tree.nodes())} error={report.normalized_error:.6e} "
          f"compression={report.compression_rate:.6f}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    if args.input is None or args.output is None:
        raise ConfigError("reconstruct needs --input (tree archive) and --output (tensor file)")
    tree = load_tree(args.input)
    scale = tree.config.max_scale if args.scale is None else args.scale
    if not 0 <= scale <= tree.config.max_scale:
        raise ConfigError(f"--scale must lie in [0, {tree.config.max_scale}], got {scale}")
    out = Path(args.output)
    write_tensor(out, reconstruct_tree(tree, scale))
    _write_provenance(out.with_name(out.name + ".config.json"), "reconstruct", args)
    return EXIT_OK


def cmd_prune(args) -> int:
    x, labels = _load_input(args)
    config = _tree_config(args, x.shape, labels)
    lams = _float_list(args.lam)
    if any(lam < 0 for lam in lams):
        raise ConfigError("--lambda values must be >= 0")
    out = _output_dir(args)
    rows = []
    for lam, (tree, report) in zip(lams, prune_sweep(x, config, lams)):
        rows.append({"lambda": lam, "nodes": len(tree.nodes()), **report.to_dict()})
        if len(lams) == 1:
            save_tree(tree, out)
    if len(lams) == 1:
        (out / "report.json").write_text(dump_json(rows[0]))
    else:
        buf = _io.StringIO()
        fields = ["lambda", "nodes", "stored_elements", "compression_rate", "normalized_error", "objective_H"]
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()})
        (out / "sweep.csv").write_text(buf.getvalue())
    _write_provenance(out / "config.json", "prune", args, {"tree": config.to_dict()})
    for row in rows:
        print(f"lambda={row['lambda']:g} nodes={row['nodes']} "
              f"error={row['normalized_error']:.6e} compression={row['compression_rate']:.6f}")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.suite == "algebra":
        results = algebra_suite(args.instances, args.seed, fault=args.inject_fault)
        lines = [r.line() for r in results]
        ok = all(r.passed for r in results)
    else:
        res = theory_suite(tuple(range(args.seed, args.seed + args.trials)), fault=args.inject_fault)
        lines = [res.line()]
        ok = res.passed
    for line in lines:
        print(line)
    if args.output:
        out = Path(args.output)
        out.write_text(dump_json({"suite": args.suite, "passed": ok, "lines": lines}))
    return EXIT_OK if ok else EXIT_INVARIANT


def cmd_bench(args) -> int:
    seeds = tuple(range(args.seed, args.seed + args.trials))
    if args.table == "table4":
        table = run_table4(seeds=seeds)
        text = table.to_csv()
        props = table.properties()
        extra = {"properties": props}
    else:
        records, text = run_table5(seeds=seeds)
        violations = sum(r["condition_holds"] and not r["bound_holds"] for r in records)
        props = {"no bound violations where the condition held": violations == 0}
        extra = {"properties": props}
    if args.output:
        out = Path(args.output)
        out.write_text(text)
        _write_provenance(out.with_name(out.name + ".config.json"), "bench", args, extra)
    else:
        sys.stdout.write(text)
    for name, ok in props.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}", file=sys.stderr)
    return EXIT_OK if all(props.values()) else EXIT_INVARIANT


def cmd_features(args) -> int:
    if args.input is None or args.labels is None:
        raise ConfigError("features needs --input (training tensor) and --labels")
    train = read_tensor(args.input)
    labels = np.asarray(_read_labels(args.labels))
    n_modes = train.ndim - 1
    clusters = (2,) * n_modes if args.clusters is None else _int_tuple(args.clusters)
    if (args.tau is None) == (args.ranks is None):
        raise ConfigError("give exactly one of --tau or --ranks")
    try:
        model, ftr = fit_features(
            train,
            labels,
            clusters,
            args.n_features,
            tau=args.tau,
            ranks=None if args.ranks is None else _int_tuple(args.ranks),
            partitioner=_partitioner(args, None),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _output_dir(args)
    (out / "model.json").write_text(model.to_json() + "\n")
    np.savetxt(out / "train_features.csv", ftr, delimiter=",", fmt="%.17g")
    if args.test is not None:
        test = read_tensor(args.test)
        try:
            fte = transform(model, test)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        np.savetxt(out / "test_features.csv", fte, delimiter=",", fmt="%.17g")
        pred = {
            "knn1": knn1_classify(ftr, labels, fte).tolist(),
            "naive_bayes": naive_bayes_classify(ftr, labels, fte).tolist(),
        }
        (out / "predictions.json").write_text(dump_json(pred))
    _write_provenance(out / "config.json", "features", args)
    return EXIT_OK


def _add_tree_flags(p):
    p.add_argument("--input", help="tensor file")
    p.add_argument("--synth", type=int, metavar="SEED", help="use the block-structured synthetic tensor")
    p.add_argument("--labels", help="JSON per-mode labels for the ground-truth partitioner")
    p.add_argument("--output", help="output directory")
    p.add_argument("--clusters", help="clusters per mode, e.g. 2,2,2")
    p.add_argument("--tau", type=float, help="energy threshold in (0, 1]")
    p.add_argument("--ranks", help="ranks per mode; several scales separated by ';'")
    p.add_argument("--max-scale", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--partitioner", choices=("kmeans", "random", "ground-truth"), default="kmeans")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mshosvd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="build a multiscale tree")
    _add_tree_flags(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("reconstruct", help="rebuild a tensor from a tree archive")
    p.add_argument("--input", help="tree archive directory")
    p.add_argument("--output", help="tensor file to write")
    p.add_argument("--scale", type=int, help="highest scale to include (default: all)")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("prune", help="greedy adaptive pruning")
    _add_tree_flags(p)
    p.add_argument("--lambda", dest="lam", default="0", help="weight(s), comma-separated for a sweep")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("verify", help="run self-check suites")
    p.add_argument("--suite", choices=("algebra", "theory"), default="algebra")
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-fault", choices=FAULTS, help=argparse.SUPPRESS)
    p.add_argument("--output", help="JSON report path")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="synthetic benchmark tables")
    p.add_argument("--table", choices=("table4", "table5"), default="table4")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0, help="first seed of the consecutive seed range")
    p.add_argument("--output", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("features", help="fit classification features")
    p.add_argument("--input", help="training tensor file, samples along the last mode")
    p.add_argument("--labels", help="JSON list of training labels")
    p.add_argument("--test", help="optional test tensor file")
    p.add_argument("--output", help="output directory")
    p.add_argument("--clusters", help="clusters per non-sample mode")
    p.add_argument("--tau", type=float)
    p.add_argument("--ranks", help="scale-0 ranks per non-sample mode")
    p.add_argument("--n-features", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--partitioner", choices=("kmeans", "random"), default="kmeans")
    p.set_defaults(func=cmd_features)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (RuntimeError, AssertionError, FloatingPointError) as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
