"""Command-line front end.

Exit codes: 0 success, 2 for config mistakes (bad flags, malformed files,
missing paths), 3 for runtime failures inside a numeric routine (diverging
training, non-finite attack loss).
"""

from __future__ import annotations

import argparse
import sys

from .decision import AttackError
from .graphdata import ParseError
from .harness import (
    ConfigError,
    cmd_attack,
    cmd_build_graph,
    cmd_plot,
    cmd_poison,
    cmd_sweep,
    cmd_train,
    parse_config,
)
from .models import TrainingError
from .poison import PoisonError


def _add_config_flags(sub: argparse.ArgumentParser, *, attack_flags=False,
                      poison_flags=False) -> None:
    sub.add_argument("--config", metavar="PATH", help="INI experiment config")
    sub.add_argument("--seed", type=int, metavar="N", help="run seed")
    sub.add_argument("--out", metavar="DIR", help="output directory")
    if attack_flags:
        sub.add_argument("--norm", choices=["l1", "l2", "linf"],
                         help="perturbation norm")
        sub.add_argument("--eps", type=float, metavar="R", help="budget radius")
        sub.add_argument("--k", metavar="N|all",
                         help="number of highest-degree target nodes")
        sub.add_argument("--proj", choices=["radial", "clamp"],
                         help="projection back onto the budget ball")
    if poison_flags:
        sub.add_argument("--lambda", dest="lam", type=float, metavar="L",
                         help="poison blend weight in [0, 1]")


def _collect_overrides(args: argparse.Namespace) -> dict:
    overrides = {}
    for key in ("seed", "out", "norm", "eps", "k", "proj", "lam"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnnattack",
        description="Train small graph models and measure how feature "
                    "perturbations degrade them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model and checkpoint it")
    _add_config_flags(p)

    p = sub.add_parser("attack", help="perturb features against a checkpoint")
    _add_config_flags(p, attack_flags=True)
    p.add_argument("--checkpoint", metavar="PATH",
                   help="model to attack (defaults to the train output path)")

    p = sub.add_parser("poison", help="corrupt features, retrain, compare")
    _add_config_flags(p, poison_flags=True)

    p = sub.add_parser("sweep", help="grid of attacks or poisons over seeds")
    _add_config_flags(p, attack_flags=True, poison_flags=True)
    p.add_argument("kind", choices=["attack", "poison"],
                   help="which grid to sweep")

    p = sub.add_parser("plot", help="render a line plot from a metrics CSV")
    p.add_argument("--metrics", required=True, metavar="CSV")
    p.add_argument("--x", required=True, metavar="COLUMN")
    p.add_argument("--y", required=True, metavar="COLUMN")
    p.add_argument("--series", default="norm", metavar="COLUMN",
                   help="one line per distinct value (default: norm)")
    p.add_argument("--out", required=True, metavar="SVG")
    p.add_argument("--where", action="append", default=[], metavar="COL=VALUE",
                   help="keep only matching rows; repeatable")

    p = sub.add_parser("build-graph", help="corpus files to graph files")
    p.add_argument("--features", required=True, metavar="PATH")
    p.add_argument("--labels", required=True, metavar="PATH")
    p.add_argument("--threshold", type=float, default=0.85, metavar="T",
                   help="cosine similarity above which nodes are linked")
    p.add_argument("--out-prefix", required=True, metavar="PREFIX")
    p.add_argument("--train-frac", type=float, default=0.1)
    p.add_argument("--val-frac", type=float, default=0.1)
    p.add_argument("--split-seed", type=int, default=0)
    return parser


def _parse_where(pairs: list[str]) -> dict:
    where = {}
    for pair in pairs:
        col, sep, value = pair.partition("=")
        if not sep or not col:
            raise ConfigError(f"--where expects COL=VALUE, got {pair!r}")
        where[col] = value
    return where


def _print_record(record) -> None:
    for name, rep in record.reports.items():
        print(f"{name}: loss={rep['loss']:.4f} accuracy={rep['accuracy']:.4f} "
              f"(n={rep['n']})")
    for name, path in record.inputs.items():
        print(f"used {name}: {path}")
    for name, path in record.artifacts.items():
        print(f"wrote {name}: {path}")


def _run(args: argparse.Namespace) -> None:
    if args.command == "plot":
        out = cmd_plot(args.metrics, args.x, args.y, args.series, args.out,
                       where=_parse_where(args.where))
        print(f"wrote {out}")
        return
    if args.command == "build-graph":
        stats = cmd_build_graph(args.features, args.labels, args.threshold,
                                args.out_prefix, train_frac=args.train_frac,
                                val_frac=args.val_frac, split_seed=args.split_seed)
        print(f"n={stats['n']} edges={stats['edges']} "
              f"density={stats['density']:.6f}")
        hist = " ".join(f"{d}:{c}" for d, c in
                        sorted(stats["degree_histogram"].items()))
        print(f"degree histogram: {hist}")
        for path in stats["files"]:
            print(f"wrote {path}")
        return

    cfg = parse_config(args.config, _collect_overrides(args))
    if args.command == "train":
        record = cmd_train(cfg)
    elif args.command == "attack":
        record = cmd_attack(cfg, checkpoint=args.checkpoint)
    elif args.command == "poison":
        record = cmd_poison(cfg)
    else:
        record = cmd_sweep(cfg, args.kind)
    _print_record(record)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _run(args)
    except (ConfigError, ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TrainingError, AttackError, PoisonError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
