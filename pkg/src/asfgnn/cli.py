"""Command-line front end.

    asfgnn run --config experiment.json [--mode FL --alpha 0.8 ...]
    asfgnn sweep --config experiment.json --variable alpha --values 0.6,0.8,1.0
    asfgnn make-data --out data/citation --seed 7

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiment import (
    ConfigError,
    ExperimentConfig,
    emit_report,
    generate_benchmark,
    run_experiment,
    sweep,
)
from .graphs import DatasetError
from .nn import NumericError


def _add_override_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="experiment config JSON")
    parser.add_argument("--mode", choices=("ASFGNN", "SFGNN", "FL", "SP", "CM"))
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--clients", type=int, dest="num_clients")
    parser.add_argument("--tuner", choices=("bo", "grid", "fixed"))
    parser.add_argument("--budget", type=int)
    parser.add_argument("--rounds", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out")


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    raw = json.loads(Path(args.config).read_text())
    for key in ("mode", "alpha", "num_clients", "tuner", "budget", "rounds", "seed", "out"):
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    return ExperimentConfig.from_dict(raw)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="asfgnn")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment")
    _add_override_args(run_p)

    sweep_p = sub.add_parser("sweep", help="repeat an experiment over one knob")
    _add_override_args(sweep_p)
    sweep_p.add_argument("--variable", required=True, choices=("alpha", "num_clients", "js_on_off"))
    sweep_p.add_argument("--values", required=True, help="comma-separated values")

    data_p = sub.add_parser("make-data", help="generate the bundled benchmark dataset")
    data_p.add_argument("--out", required=True)
    data_p.add_argument("--seed", type=int, default=7)

    args = parser.parse_args(argv)
    try:
        if args.command == "make-data":
            paths = generate_benchmark(args.out, args.seed)
            for name, path in paths.items():
                print(f"{name}: {path}")
            return 0

        cfg = _load_config(args)
        if args.command == "run":
            output = run_experiment(cfg)
            out_dir = cfg.out or "runs/latest"
            emit_report(output, out_dir)
            print(
                f"mode={cfg.mode} best_val={output.report.best_value:.4f} "
                f"test={output.report.test_accuracy:.4f} trials={output.report.trial_count} "
                f"out={out_dir}"
            )
            return 0

        values = []
        for token in args.values.split(","):
            token = token.strip()
            if args.variable == "alpha":
                values.append(float(token))
            elif args.variable == "num_clients":
                values.append(int(token))
            else:
                values.append(token.lower() in ("1", "true", "on", "yes"))
        rows = sweep(cfg, args.variable, values)
        out_dir = Path(cfg.out or "runs/sweep")
        out_dir.mkdir(parents=True, exist_ok=True)
        table = out_dir / "sweep.csv"
        with open(table, "w") as fh:
            fh.write(f"{args.variable},best_value,test_accuracy,trial_count\n")
            for value, output in rows:
                r = output.report
                fh.write(f"{value},{r.best_value:.10g},{r.test_accuracy:.10g},{r.trial_count}\n")
        for value, output in rows:
            print(f"{args.variable}={value} test={output.report.test_accuracy:.4f}")
        print(f"table: {table}")
        return 0
    except (ConfigError, DatasetError, json.JSONDecodeError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
