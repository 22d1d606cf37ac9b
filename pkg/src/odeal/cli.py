"""Command-line interface.

Subcommands: synth (write a synthetic CSV), ingest-check (validate a CSV),
experiment (uncertainty vs random querying), init-compare (outlier-ranked vs
random initial sets), serve (HTTP annotation service).

Exit codes: 0 success, 2 usage/config error, 3 I/O failure, 4 session
failure, 5 target F1 unreachable. `ODEAL_LOG` sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .data import generate_synthetic_dataset, parse_observations_csv, write_observations_csv
from .errors import OdealError, TargetUnreachableError
from .experiments import run_init_experiment, run_strategy_experiment
from .metrics import CostComparison, cost_reduced
from .models import ClassifierSpec

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_SESSION = 4
EXIT_TARGET = 5

log = logging.getLogger("odeal")


def _configure_logging() -> None:
    level_name = os.environ.get("ODEAL_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _parse_seeds(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip() != ""]


def _parse_grid(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip() != ""]


def _load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _require_keys(config: dict, keys) -> None:
    for key in keys:
        if key not in config:
            raise KeyError(key)


def _resolve_dataset(config: dict | None, args):
    if config is not None:
        block = config["dataset"]
        if "csv" in block:
            return parse_observations_csv(block["csv"])
        if "synthetic" in block:
            return generate_synthetic_dataset(
                n=block["synthetic"]["n"],
                error_rate=block["synthetic"]["error_rate"],
                seed=block["synthetic"].get("seed", 0),
            )
        raise KeyError("dataset.csv or dataset.synthetic")
    return generate_synthetic_dataset(
        n=args.n, error_rate=args.error_rate, seed=args.seed or 0
    )


def _resolve_classifier(config: dict | None, args) -> ClassifierSpec:
    if config is not None:
        return ClassifierSpec.from_dict(config["classifier"])
    return ClassifierSpec(kind=args.classifier)


def cmd_synth(args) -> int:
    try:
        dataset = generate_synthetic_dataset(
            n=args.n, error_rate=args.error_rate, seed=args.seed or 0
        )
    except OdealError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        write_observations_csv(dataset, args.out)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"rows={len(dataset)} realized_error_rate={dataset.error_rate:.6f} "
          f"out={args.out}")
    return EXIT_OK


def cmd_ingest_check(args) -> int:
    path = Path(args.path)
    if not path.exists():
        print(f"error: no such file: {path}", file=sys.stderr)
        return EXIT_IO
    try:
        dataset = parse_observations_csv(path)
    except OdealError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    positives = sum(dataset.labels)
    print(f"rows={len(dataset)} erroneous={positives} "
          f"error_rate={dataset.error_rate:.6f}")
    return EXIT_OK


def _write_strategy_outputs(report, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "strategy_report.json").write_bytes(report.to_json_bytes())
    for run in report.runs:
        run.report_us.write_curve_csv(
            out_dir / f"curve_uncertainty_seed{run.seed}.csv"
        )
        run.report_rs.write_curve_csv(
            out_dir / f"curve_random_seed{run.seed}.csv"
        )


def cmd_experiment(args) -> int:
    try:
        config = _load_config(args.config) if args.config else None
        if config is not None:
            _require_keys(config, ("dataset", "classifier", "session"))
        dataset = _resolve_dataset(config, args)
        classifier = _resolve_classifier(config, args)
        session = (config or {}).get("session", {})
        seeds = _parse_seeds(args.seeds) if args.seeds else \
            (config or {}).get("experiment", {}).get("seeds", [0])
        n_initial = args.ni or session.get("n_initial", 100)
        budget = args.budget or session.get("budget", n_initial + 150)
        k = args.k or session.get("k_per_cycle", 1)
        strategy = args.strategy or "uncertainty"
        init_method = args.init or session.get("init_method", "random")
    except (KeyError, json.JSONDecodeError) as exc:
        print(f"error: bad config: missing or invalid key {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except OdealError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        report = run_strategy_experiment(
            dataset,
            classifier,
            n_initial=n_initial,
            budget=budget,
            k_per_cycle=k,
            seeds=seeds,
            init_method=init_method,
            strategies=(strategy, "random"),
        )
    except OdealError as exc:
        print(f"error: session failed: {exc}", file=sys.stderr)
        return EXIT_SESSION
    try:
        _write_strategy_outputs(report, Path(args.out))
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    agg = report.to_json_dict()["aggregate"]
    print(f"seeds={agg['seeds']} uncertainty_wins={agg['uncertainty_wins']} "
          f"median_absolute_improvement={agg['median_absolute_improvement']:.4f}")
    return EXIT_OK


def _format_percent(value: float) -> str:
    return f"{value * 100.0:.1f}%"


def cmd_init_compare(args) -> int:
    if args.table3_row:
        try:
            parts = [int(v) for v in args.table3_row.split(",")]
            if len(parts) != 4:
                raise ValueError("expected 4 comma-separated counts")
            comparison = CostComparison(*parts)
            value = cost_reduced(comparison)
        except (ValueError, OdealError) as exc:
            print(f"error: bad --table3-row: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(f"reduced cost: {_format_percent(value)}")
        return EXIT_OK

    try:
        config = _load_config(args.config) if args.config else None
        if config is not None:
            _require_keys(config, ("dataset", "classifier"))
        dataset = _resolve_dataset(config, args)
        classifier = _resolve_classifier(config, args)
        experiment = (config or {}).get("experiment", {})
        seeds = _parse_seeds(args.seeds) if args.seeds else \
            experiment.get("seeds", [0])
        ni_grid = _parse_grid(args.ni_grid) if args.ni_grid else \
            experiment.get("ni_grid", [100, 200, 400])
        target = args.target_f1 if args.target_f1 is not None else \
            experiment.get("target_f1", 0.3)
        query_budget = args.budget or experiment.get("query_budget", 150)
        outlier_method = args.init or "lof"
    except (KeyError, json.JSONDecodeError) as exc:
        print(f"error: bad config: missing or invalid key {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except OdealError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        report = run_init_experiment(
            dataset,
            classifier,
            ni_grid=ni_grid,
            query_budget=query_budget,
            k_per_cycle=args.k or 1,
            target_f1=target,
            seeds=seeds,
            outlier_method=outlier_method,
        )
    except TargetUnreachableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TARGET
    except OdealError as exc:
        print(f"error: session failed: {exc}", file=sys.stderr)
        return EXIT_SESSION
    try:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "init_compare_report.json").write_bytes(report.to_json_bytes())
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    median = report.median_cost_reduced
    shown = _format_percent(median) if median is not None else "n/a"
    print(f"median reduced cost: {shown}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(Path(args.data_dir))
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="odeal",
        description="Outlier-detection-enhanced active learning for ocean "
                    "observation quality assessment.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="write a synthetic Argo-like CSV")
    synth.add_argument("--n", type=int, required=True)
    synth.add_argument("--error-rate", type=float, required=True)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("-o", "--out", required=True)
    synth.set_defaults(func=cmd_synth)

    check = sub.add_parser("ingest-check", help="validate an observation CSV")
    check.add_argument("path")
    check.set_defaults(func=cmd_ingest_check)

    exp = sub.add_parser("experiment", help="uncertainty vs random querying")
    _add_experiment_flags(exp)
    exp.add_argument("--strategy", choices=("uncertainty", "random"))
    exp.set_defaults(func=cmd_experiment)

    init = sub.add_parser("init-compare", help="outlier vs random initial sets")
    _add_experiment_flags(init)
    init.add_argument("--target-f1", type=float)
    init.add_argument("--ni-grid", help="comma-separated initial sizes")
    init.add_argument("--table3-row",
                      help="replay mode: N_I_outlier,N_L_outlier,N_I_random,N_L_random")
    init.set_defaults(func=cmd_init_compare)

    serve = sub.add_parser("serve", help="run the annotation service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--data-dir", default="odeal-data")
    serve.set_defaults(func=cmd_serve)
    return parser


def _add_experiment_flags(sub_parser) -> None:
    sub_parser.add_argument("--config", help="JSON config file")
    sub_parser.add_argument("--out", default="odeal-out", help="output directory")
    sub_parser.add_argument("--seed", type=int)
    sub_parser.add_argument("--seeds", help="comma-separated seed list")
    sub_parser.add_argument("--n", type=int, default=20000,
                            help="synthetic rows when no config names a dataset")
    sub_parser.add_argument("--error-rate", type=float, default=0.005)
    sub_parser.add_argument("--classifier", choices=("knn", "gbdt"), default="gbdt")
    sub_parser.add_argument("--init", choices=("random", "lof", "iforest", "ocsvm"))
    sub_parser.add_argument("--k", type=int)
    sub_parser.add_argument("--budget", type=int)
    sub_parser.add_argument("--ni", type=int)


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    log.info("running %s", args.command)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
