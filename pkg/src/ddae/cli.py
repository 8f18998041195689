"""Command-line entry point: ``ddae {train,evaluate,analyze-steps,sweep,latent}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import experiment
from .config import load_config
from .errors import DDAEError

log = logging.getLogger("ddae")


def _add_config_args(p):
    p.add_argument("config", help="JSON config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (value parsed as JSON); repeatable")


def cmd_train(args) -> int:
    cfg = load_config(args.config, args.overrides)
    path = experiment.run_train(cfg)
    print(path)
    return 0


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config, args.overrides)
    result = experiment.run_evaluate(cfg)
    s = result["summary"]
    if s:
        print(f"{result['dataset']} {result['variant']} {result['mode']}: "
              f"PR-AUC {s['pr_auc']['mean']:.4f} +/- {s['pr_auc']['std']:.4f}, "
              f"ROC-AUC {s['roc_auc']['mean']:.4f} +/- {s['roc_auc']['std']:.4f}")
    print(f"{cfg['out_dir']}/result.json")
    return 0


def cmd_analyze_steps(args) -> int:
    curve = experiment.analyze_steps(args.checkpoint, args.dataset, args.metric, args.out)
    if args.json:
        json.dump(curve, sys.stdout)
        print()
    else:
        print(f"{len(curve['t'])} steps; final cumulative {args.metric} = {curve['cumulative'][-1]:.6f}")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.overrides, allow_grid=True)
    if "grid" not in cfg:
        raise DDAEError("sweep config needs a 'grid' object")
    index = experiment.run_sweep(cfg, jobs=args.jobs, resume=args.resume)
    done = sum(c["status"] == "done" for c in index["cells"])
    print(f"{len(index['cells'])} cells ({done} run, {len(index['cells']) - done} skipped); "
          f"index at {cfg['out_dir']}/index.json")
    return 0


def cmd_latent(args) -> int:
    z = experiment.export_latent(args.checkpoint, args.dataset, args.t, args.out)
    print(f"{z.shape[0]} x {z.shape[1]} latent codes written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddae", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model and write checkpoint.json")
    _add_config_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="multi-seed split/train/score run; writes result.json")
    _add_config_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze-steps", help="per-step and cumulative metric curve of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True, help="dataset name (data/<name>.csv) or CSV path")
    p.add_argument("--metric", default="pr_auc", choices=["pr_auc", "roc_auc"])
    p.add_argument("--out", default="steps.csv")
    p.add_argument("--json", action="store_true", help="also print the curve as JSON")
    p.set_defaults(func=cmd_analyze_steps)

    p = sub.add_parser("sweep", help="evaluate every cell of a hyperparameter grid")
    _add_config_args(p)
    p.add_argument("--jobs", type=int, default=1, help="cells run in parallel")
    p.add_argument("--resume", action="store_true", help="skip cells with a valid result.json")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("latent", help="export latent codes of a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--t", type=int, required=True, help="conditioning step (1-based)")
    p.add_argument("--out", default="latent.csv")
    p.set_defaults(func=cmd_latent)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DDAEError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
