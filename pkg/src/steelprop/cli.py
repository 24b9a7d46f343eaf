"""Command-line entry point.

Subcommands: synth, validate, augment, train, compare, report, config init.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import pipeline
from .config import DEFAULT_CONFIG_TOML, load_config
from .dataset import PROPERTIES
from .errors import DataError, NumericalError, SteelpropError, UsageError
from .manifest import atomic_write


class _Parser(argparse.ArgumentParser):
    def error(self, message):   # argparse default exits 2; the contract is 1
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="steelprop",
                     description="Steel alloy property regression workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None,
                       help="TOML experiment config")
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (default from config)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the experiment seed")

    p = sub.add_parser("synth", help="generate a synthetic alloy dataset CSV")
    common(p)
    p.add_argument("--records", type=int, default=None)

    p = sub.add_parser("validate", help="parse and validate a dataset CSV")
    p.add_argument("--data", type=Path, required=True)

    p = sub.add_parser("augment", help="expand records into train_val/test CSVs")
    common(p)
    p.add_argument("--data", type=Path, default=None,
                   help="dataset CSV (default from config)")
    p.add_argument("--property", choices=PROPERTIES, default=None,
                   help="augment a single property instead of all configured")

    p = sub.add_parser("train", help="cross-validate one family on one property")
    common(p)
    p.add_argument("--family", choices=pipeline.FAMILIES, required=True)
    p.add_argument("--property", choices=PROPERTIES, required=True)
    p.add_argument("--jobs", type=int, default=None,
                   help="parallel fold workers (default from config)")

    p = sub.add_parser("compare", help="Friedman + Bonferroni over report CSVs")
    common(p)
    p.add_argument("--reports", type=Path, nargs="+", required=True)
    p.add_argument("--alpha", type=float, default=0.05)

    p = sub.add_parser("report", help="scatter SVG from a predictions CSV")
    common(p)
    p.add_argument("--pairs", type=Path, required=True)
    p.add_argument("--title", default="")
    p.add_argument("--svg", type=Path, default=None,
                   help="output SVG path (default: pairs path with .svg)")

    p = sub.add_parser("config", help="configuration helpers")
    p.add_argument("action", choices=["init"])
    p.add_argument("--out", type=Path, default=None,
                   help="write the default TOML here (default: stdout)")
    return parser


def _out_dir(args, cfg) -> Path:
    return args.out if args.out is not None else Path(cfg.out_dir)


def _dispatch(args) -> int:
    if args.command == "config":
        if args.out is None:
            sys.stdout.write(DEFAULT_CONFIG_TOML)
        else:
            atomic_write(args.out, DEFAULT_CONFIG_TOML)
            print(f"wrote {args.out}")
        return 0

    if args.command == "validate":
        info = pipeline.run_validate(args.data)
        print(f"{args.data}: {info['records']} records, "
              f"{info['ranged_elements']} ranged elements")
        return 0

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed

    if args.command == "synth":
        if args.records is not None:
            cfg.synth_records = args.records
        out = _out_dir(args, cfg)
        out_path = out / "alloys.csv" if out.suffix == "" else out
        info = pipeline.run_synth(cfg, out_path, seed=cfg.seed)
        print(f"wrote {info['records']} records to {info['path']}")
        return 0

    if args.command == "augment":
        data = args.data if args.data is not None else Path(cfg.dataset_csv)
        props = [args.property] if args.property else None
        counts = pipeline.run_augment(cfg, data, _out_dir(args, cfg), props)
        for prop, c in counts.items():
            print(f"{prop}: {c['train_val']} train_val samples, "
                  f"{c['test']} test samples")
        return 0

    if args.command == "train":
        jobs = args.jobs if args.jobs is not None else cfg.jobs
        info = pipeline.run_train(cfg, args.family, args.property,
                                  _out_dir(args, cfg), jobs=jobs, seed=cfg.seed)
        print(f"{info['family']}/{info['property']}: variant {info['variant']}, "
              f"mean test R2 {info['mean_test_r2']:.5f}, "
              f"mean EQM {info['mean_test_eqm']:.5g}")
        print(f"report: {info['report']}")
        return 0

    if args.command == "compare":
        info = pipeline.run_compare(args.reports, _out_dir(args, cfg),
                                    alpha=args.alpha, seed=cfg.seed,
                                    config_snapshot=cfg.snapshot())
        print(f"property {info['property']}: Friedman chi2 = "
              f"{info['statistic']:.4f}, p = {info['p_value']:.3g}")
        for fam, rank in info["mean_ranks"].items():
            print(f"  mean rank {fam}: {rank:.2f}")
        if info["significant_pairs"]:
            for a, b in info["significant_pairs"]:
                print(f"  significant: {a} vs {b}")
        else:
            print("  no significant pairs")
        return 0

    if args.command == "report":
        svg = args.svg if args.svg is not None else args.pairs.with_suffix(".svg")
        info = pipeline.run_report(args.pairs, svg, title=args.title)
        print(f"wrote {info['svg']} ({info['points']} points) and {info['csv']}")
        return 0

    raise UsageError(f"unhandled command {args.command!r}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _dispatch(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except SteelpropError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
