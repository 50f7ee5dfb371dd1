"""Command-line front end.

Exit codes: 0 success, 1 usage or configuration problem, 2 data file
problem, 3 runtime failure.  ``ACTIVEMETRIC_DATA_DIR`` rebases relative
dataset paths; ``ACTIVEMETRIC_PORT`` sets the default serve port.
"""

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .clustering import adjusted_rand_index
from .datagen import GENERATORS, SimSetting
from .errors import IoError, ParseError
from .harness import (
    ActiveSession,
    RunConfig,
    config_dataset,
    config_from_dict,
    config_to_dict,
    drive_session,
    label_oracle,
    run_experiment,
)
from .io import ResultRecord, load_csv, save_csv, save_results

PORT_VAR = "ACTIVEMETRIC_PORT"
DATA_DIR_VAR = "ACTIVEMETRIC_DATA_DIR"


class UsageError(Exception):
    """Bad arguments or a bad config file; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        raise UsageError(message)


def _data_dir() -> Path | None:
    raw = os.environ.get(DATA_DIR_VAR)
    return Path(raw) if raw else None


def _rebase(path: str) -> str:
    """Dataset paths are relative to the data directory when one is set."""
    base = _data_dir()
    if base is not None and not Path(path).is_absolute():
        return str(base / path)
    return path


def _load_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None


def _parse_config(raw: Any, source: str) -> RunConfig:
    if not isinstance(raw, dict):
        raise UsageError(f"config {source} must hold a JSON object")
    try:
        cfg = config_from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad config {source}: {exc}") from None
    if cfg.dataset is not None:
        cfg = dataclasses.replace(cfg, dataset=_rebase(cfg.dataset))
    return cfg


def _single_config(path: str) -> RunConfig:
    return _parse_config(_load_json(path), path)


def _config_grid(path: str) -> list[RunConfig]:
    raw = _load_json(path)
    if isinstance(raw, dict) and "grid" in raw:
        entries = raw["grid"]
        if not isinstance(entries, list) or not entries:
            raise UsageError(f"config {path}: grid must be a nonempty list")
        return [_parse_config(e, f"{path}[{k}]") for k, e in enumerate(entries)]
    return [_parse_config(raw, path)]


def _labeled_dataset(cfg: RunConfig):
    data = config_dataset(cfg)
    if data.labels is None:
        raise IoError(f"{cfg.dataset}: the automated oracle needs a label column")
    return data


def _run_label(cfg: RunConfig) -> str:
    return cfg.setting.name if cfg.setting is not None else Path(cfg.dataset).stem


def cmd_generate(args: argparse.Namespace) -> int:
    try:
        setting = SimSetting(name=args.name, p1=args.p1, p2=args.p2, n=args.n,
                             n_clusters=args.clusters, seed=args.seed,
                             c=args.c, r=args.r, balanced=args.balanced)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data = GENERATORS[setting.name](setting)
    save_csv(_rebase(args.out), data)
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = dataclasses.replace(_single_config(args.config), reps=1)
    data = _labeled_dataset(cfg)
    trajectory = drive_session(ActiveSession(data, cfg), label_oracle(data.labels))
    ari = adjusted_rand_index(trajectory.assignment.labels, data.labels)
    print(f"queries {trajectory.queries_spent}")
    print(f"loops {len(trajectory.steps)}")
    print(f"ari {ari:.6f}")
    if args.out:
        record = ResultRecord(setting=_run_label(cfg), strategy=cfg.strategy,
                              n_queries=cfg.budget, rep=0, seed=cfg.seed,
                              ari=float(ari))
        save_results(args.out, [record], config=config_to_dict(cfg))
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    grid = _config_grid(args.config)
    for cfg in grid:
        if cfg.dataset is not None and load_csv(cfg.dataset).labels is None:
            raise IoError(f"{cfg.dataset}: benchmarks need a label column")
    result = run_experiment(grid, path=args.out, timings=args.timings)
    for (setting, strategy, n_queries), cell in result.cells.items():
        print(f"{setting} {strategy} {n_queries} "
              f"mean {cell.mean:.6f} std {cell.std:.6f} n {cell.n}")
    for failure in result.failures:
        print(f"failed: {failure}", file=sys.stderr)
    return 0


def cmd_weights(args: argparse.Namespace) -> int:
    cfg = dataclasses.replace(_single_config(args.config), reps=1)
    data = _labeled_dataset(cfg)
    trajectory = drive_session(ActiveSession(data, cfg), label_oracle(data.labels))
    names = data.feature_names or tuple(f"x{k + 1}" for k in range(data.p))
    weights = trajectory.feature_weights
    for j in np.argsort(-weights, kind="stable"):
        print(f"{names[j]} {weights[j]:.6f}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import create_app

    if args.port is not None:
        port = args.port
    else:
        raw = os.environ.get(PORT_VAR, "8000")
        try:
            port = int(raw)
        except ValueError:
            raise UsageError(f"{PORT_VAR} must be an integer, got {raw!r}") from None
    defaults = _single_config(args.config) if args.config else None
    data = load_csv(_rebase(args.dataset)) if args.dataset else None
    base = _data_dir()
    app = create_app(defaults=defaults, data=data,
                     data_dir=str(base) if base else None)

    import uvicorn

    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="activemetric",
                     description="Active constraint collection with a learned "
                                 "feature metric.")
    commands = parser.add_subparsers(dest="command", required=True)

    generate = commands.add_parser("generate", help="write a synthetic dataset CSV")
    generate.add_argument("--name", choices=sorted(GENERATORS), default="basic")
    generate.add_argument("--p1", type=int, required=True,
                          help="informative feature count")
    generate.add_argument("--p2", type=int, required=True,
                          help="noise feature count")
    generate.add_argument("--n", type=int, required=True)
    generate.add_argument("--clusters", type=int, required=True)
    generate.add_argument("--c", type=float, default=None,
                          help="spike height (basic/signflip)")
    generate.add_argument("--r", type=float, default=None,
                          help="center radius (sphere)")
    generate.add_argument("--balanced", action="store_true")
    generate.add_argument("--seed", type=int, default=0)
    generate.add_argument("--out", required=True)
    generate.set_defaults(func=cmd_generate)

    run = commands.add_parser("run", help="one session with the automated oracle")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="optional results CSV")
    run.set_defaults(func=cmd_run)

    bench = commands.add_parser("bench", help="replicate a config grid")
    bench.add_argument("--config", required=True)
    bench.add_argument("--out", required=True)
    bench.add_argument("--timings", action="store_true",
                       help="record wall time per replicate")
    bench.set_defaults(func=cmd_bench)

    serve = commands.add_parser("serve", help="start the labeling session service")
    serve.add_argument("--port", type=int, default=None)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--dataset", help="default dataset CSV for new sessions")
    serve.add_argument("--config", help="default session config JSON")
    serve.set_defaults(func=cmd_serve)

    weights = commands.add_parser(
        "weights", help="print final feature weights, heaviest first")
    weights.add_argument("--config", required=True)
    weights.set_defaults(func=cmd_weights)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (IoError, ParseError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # the exit-code contract wants 3, not a traceback
        print(f"failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
