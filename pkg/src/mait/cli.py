"""Command line entry point: ``mait run``, ``mait validate`` and ``mait dataset``."""

import argparse
import logging
import os
import sys

from .datasets import DATASETS
from .exceptions import ConfigError, DataError
from .report.config import MODES, parse_config
from .report.pipeline import StageError, load_configured_table, run_to_directory

log = logging.getLogger("mait")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4


def _build_parser():
    ap = argparse.ArgumentParser(prog="mait", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the pipeline and write the report")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--threads", type=int, help="thread budget (default: MAIT_THREADS or 1)")
    run.add_argument("--mode", choices=list(MODES) + ["all"])

    val = sub.add_parser("validate", help="check the config and input data without fitting anything")
    val.add_argument("--config", required=True)

    ds = sub.add_parser("dataset", help="write a demo dataset as CSV")
    ds.add_argument("name", choices=sorted(DATASETS))
    ds.add_argument("--out", required=True)
    ds.add_argument("--seed", type=int, default=0, help="seed for the synthetic generator")
    return ap


def _load(args):
    cfg = parse_config(args.config)
    modes = None
    if getattr(args, "mode", None):
        modes = list(MODES) if args.mode == "all" else [args.mode]
    return cfg.with_overrides(getattr(args, "seed", None), getattr(args, "out", None), getattr(args, "threads", None), modes)


def _cmd_run(args):
    cfg = _load(args)
    out = os.path.abspath(args.out) if args.out else None
    bundle, out_dir = run_to_directory(cfg, out, args.threads)
    print(f"report written to {os.path.join(out_dir, 'report.html')} ({bundle.runtime_seconds:.1f}s, {bundle.threads} thread(s))")
    return EXIT_OK


def _cmd_validate(args):
    cfg = _load(args)
    t = load_configured_table(cfg, cfg.path(cfg["data"]["development"]))
    msg = f"config ok; development data {t.row_count} rows x {t.column_count} columns"
    if cfg["data"]["test"]:
        e = load_configured_table(cfg, cfg.path(cfg["data"]["test"]))
        msg += f"; test data {e.row_count} rows"
    print(msg)
    return EXIT_OK


def _cmd_dataset(args):
    fn = DATASETS[args.name]
    path = fn(args.out) if args.name == "wbc" else fn(args.out, seed=args.seed)
    print(f"wrote {path}")
    return EXIT_OK


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = _build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "validate": _cmd_validate, "dataset": _cmd_dataset}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
