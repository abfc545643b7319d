"""``phasegan`` command line: staged runs driven by one YAML config.

Subcommands map onto the experiment stages and share three flags:
``--config`` (required), ``--out`` and ``--seed`` (overrides of the config's
``output_dir`` and ``seed``). Exit codes: 0 on success, 2 for configuration
problems, 1 for runtime failures; failures also emit a one-line JSON record
on stderr so wrapping scripts can parse what went wrong.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import experiment
from .config import ConfigError, load_config

__all__ = ["main", "build_parser"]

_STAGES = {
    "generate-data": experiment.generate_data,
    "pretrain": experiment.pretrain_stage,
    "train": experiment.train_stage,
    "evaluate": experiment.evaluate_stage,
    "plot": experiment.plot_stage,
    "sweep": experiment.sweep_stage,
    "full-run": experiment.full_run,
}

_HELP = {
    "generate-data": "sample the synthetic benchmark and write its CSV files",
    "pretrain": "supervised encoder pretraining on the training split",
    "train": "adversarial training (with and without critic) plus baselines",
    "evaluate": "score all trained models and write report.csv/summary.json",
    "plot": "render timeline SVGs for a few test transitions",
    "sweep": "retrain and score every configured forecast horizon",
    "full-run": "all stages in order on one seed",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phasegan",
        description="Train and evaluate phase-forecasting models from a YAML config.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _STAGES:
        cmd = sub.add_parser(name, help=_HELP[name])
        cmd.add_argument("--config", required=True,
                         help="path to the experiment YAML")
        cmd.add_argument("--out", default=None,
                         help="output directory (overrides the config's output_dir)")
        cmd.add_argument("--seed", type=int, default=None,
                         help="experiment seed (overrides the config's seed)")
    return parser


def _fail(exc: Exception, exit_code: int) -> int:
    record = {"error": type(exc).__name__, "message": str(exc),
              "exit_code": exit_code}
    print(json.dumps(record), file=sys.stderr)
    return exit_code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed, output_dir=args.out)
        if cfg.output_dir is None:
            raise ConfigError(
                ["output_dir: not set; add it to the config or pass --out"])
    except ConfigError as err:
        return _fail(err, 2)

    base_dir = os.path.dirname(os.path.abspath(args.config))
    out_dir = cfg.output_dir
    try:
        result = _STAGES[args.command](cfg, out_dir, base_dir)
    except (RuntimeError, ValueError, OSError) as err:
        # TrainingDiverged, data-format, graph and checkpoint errors all land here
        return _fail(err, 1)

    paths = experiment.artifact_paths(out_dir)
    done = {
        "generate-data": [paths["annotations"], paths["features"], paths["graph"]],
        "pretrain": [paths["recognizer"], paths["pretrain_log"]],
        "train": [paths["gan_model"], paths["wogan_model"], paths["hmm"]],
        "evaluate": [paths["report"], paths["summary"]],
        "plot": result if args.command == "plot" else [],
        "sweep": [paths["sweep"]],
        "full-run": [paths["report"], paths["summary"]],
    }[args.command]
    for path in done:
        if isinstance(path, str) and os.path.exists(path):
            print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
