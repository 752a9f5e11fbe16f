"""Command line entry point.

    mlbatch run --dataset yeast.arff --labels yeast.xml --strategies random,adaptive --out runs/yeast
    mlbatch compare runs/*/summary.csv --metric all
    mlbatch stats --dataset yeast.arff --labels yeast.xml
    mlbatch synth --out synthetic.csv

``run`` also accepts ``--config FILE`` with ``key = value`` lines using the
long flag names; flags given on the command line win.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import data
from .experiment import ExperimentConfig, compare, run_experiment, thread_budget, write_comparison
from .imbalance import DegenerateInputError, build_profile
from .selector import STRATEGIES
from .trainer import TrainConfig

EXIT_DATA = 1
EXIT_USAGE = 2


def _csv_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _int_list(value: str) -> list[int]:
    return [int(v) for v in _csv_list(value)]


def _run_parser(sub) -> argparse.ArgumentParser:
    p = sub.add_parser("run", help="train and compare batch selection strategies")
    p.add_argument("--config", help="key = value file; command-line flags override it")
    p.add_argument("--dataset")
    p.add_argument("--format", choices=("arff", "csv"))
    p.add_argument("--labels", help="label list file (ARFF) or trailing label count")
    p.add_argument("--strategies", type=_csv_list, default=["random", "adaptive"],
                   help="comma list of " + " | ".join(s.replace("_", "-") for s in STRATEGIES))
    p.add_argument("--se", type=float, default=8.0, help="selection pressure")
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--warmup", type=int, default=3)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seeds", type=_int_list, default=[0])
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--select-metric", default="macro_auc")
    p.add_argument("--density-epochs", type=_int_list, default=[30, 70])
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--out", default="runs")
    p.add_argument("--dump-scores", action="store_true")
    p.add_argument("--debug-batches", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlbatch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    parser.run_parser = _run_parser(sub)

    c = sub.add_parser("compare", help="Wilcoxon signed-rank comparison of summary files")
    c.add_argument("summaries", nargs="+")
    c.add_argument("--metric", default="all")
    c.add_argument("--baseline", default="random")
    c.add_argument("--candidate", default="adaptive")
    c.add_argument("--alpha", type=float, default=0.05)
    c.add_argument("--out", help="optional CSV destination")

    s = sub.add_parser("stats", help="dataset statistics and imbalance profile")
    s.add_argument("--dataset", required=True)
    s.add_argument("--format", choices=("arff", "csv"))
    s.add_argument("--labels", required=True)
    s.add_argument("--k", type=int, default=5)
    s.add_argument("--dump", help="directory for per-matrix CSV dumps")

    g = sub.add_parser("synth", help="write the synthetic imbalanced benchmark as CSV")
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int, default=2000)
    g.add_argument("--d", type=int, default=20)
    g.add_argument("--q", type=int, default=10)
    g.add_argument("--rare-labels", type=int, default=2)
    g.add_argument("--rare-rate", type=float, default=0.02)
    g.add_argument("--noise", type=float, default=0.5)
    g.add_argument("--seed", type=int, default=0)
    return parser


def config_file_args(path) -> list[str]:
    """Translate ``key = value`` lines into equivalent flags."""
    args = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "yes", "on"):
            args.append(flag)
        elif value.lower() in ("false", "no", "off"):
            continue
        else:
            args += [flag, value]
    return args


def _cmd_run(parser, argv) -> int:
    run_parser = parser.run_parser
    args = parser.parse_args(argv)
    if args.config:
        try:
            file_args = config_file_args(args.config)
        except (OSError, ValueError) as exc:
            run_parser.error(str(exc))
        args = parser.parse_args(["run"] + file_args + argv[1:])
    if not args.dataset:
        run_parser.error("--dataset is required")
    fmt = args.format or Path(args.dataset).suffix.lstrip(".").lower()
    if fmt not in ("arff", "csv"):
        run_parser.error("cannot infer dataset format; pass --format arff|csv")
    if args.labels is None:
        run_parser.error("--labels is required (label list file or trailing label count)")
    if fmt == "csv" and not str(args.labels).isdigit():
        run_parser.error("CSV datasets need an integer --labels count")
    try:
        train_cfg = TrainConfig(
            strategy=args.strategies[0] if args.strategies else "random",
            batch_size=args.batch_size, epochs=args.epochs, s_e=args.se, warmup=args.warmup,
            k=args.k, lr=args.lr, weight_decay=args.weight_decay, hidden=args.hidden,
            standardize=args.standardize, threshold=args.threshold,
            select_metric=args.select_metric, density_epochs=tuple(args.density_epochs))
        exp_cfg = ExperimentConfig(
            strategies=args.strategies, folds=args.folds, seeds=args.seeds,
            dataset_name=Path(args.dataset).stem, dump_scores=args.dump_scores,
            debug_batches=args.debug_batches, threads=thread_budget(),
            split_seed=args.split_seed, train=train_cfg)
        if not args.strategies or not args.seeds:
            raise ValueError("need at least one strategy and one seed")
    except ValueError as exc:
        run_parser.error(str(exc))
    try:
        dataset = data.load(args.dataset, fmt, args.labels)
    except (OSError, data.DataError) as exc:
        print(f"mlbatch: cannot load dataset: {exc}", file=sys.stderr)
        return EXIT_DATA
    if args.folds > dataset.n:
        run_parser.error(f"--folds {args.folds} exceeds {dataset.n} instances")
    out = run_experiment(dataset, exp_cfg, args.out)
    with (out / "config.txt").open("w") as fh:
        for key, value in sorted(vars(args).items()):
            if key in ("command", "config") or value is None or value is False:
                continue
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            fh.write(f"{key} = {'true' if value is True else value}\n")
    print(f"wrote {out}")
    return 0


def _cmd_compare(args) -> int:
    try:
        rows = compare(args.summaries, args.metric, args.baseline, args.candidate, args.alpha)
    except ValueError as exc:
        print(f"mlbatch compare: {exc}", file=sys.stderr)
        return EXIT_USAGE
    width = max(len(r.metric) for r in rows)
    for r in rows:
        print(f"{r.metric:<{width}}  {r.label()}")
    if args.out:
        write_comparison(rows, args.out)
    return 0


def _cmd_stats(args) -> int:
    try:
        ds = data.load(args.dataset, args.format, args.labels)
        st = data.stats(ds)
        profile = build_profile(ds.features, ds.labels, k=min(args.k, ds.n - 1))
    except (OSError, data.DataError, DegenerateInputError) as exc:
        print(f"mlbatch: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(f"n={ds.n} d={ds.d} q={ds.q} card={st.card:.4f} dens={st.dens:.4f} "
          f"mean_ir={profile.mean_ir:.4f} minority={int(profile.minority_mask.sum())}")
    if args.dump:
        profile.dump_csv(args.dump, ds.label_names)
    return 0


def _cmd_synth(args) -> int:
    ds = data.make_synthetic(n=args.n, d=args.d, q=args.q, rare_labels=args.rare_labels,
                             rare_rate=args.rare_rate, noise=args.noise, seed=args.seed)
    data.write_csv(ds, args.out)
    print(f"wrote {args.out} ({ds.n}x{ds.d}, {ds.q} labels)")
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        return _cmd_run(parser, argv)
    if args.command == "compare":
        return _cmd_compare(args)
    if args.command == "stats":
        return _cmd_stats(args)
    return _cmd_synth(args)


if __name__ == "__main__":
    sys.exit(main())
