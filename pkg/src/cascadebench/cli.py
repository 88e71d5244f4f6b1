"""Command line entry point.

    cascadebench run --config exp.json
    cascadebench sweep --config exp.json --c 0.5,1,2,5
    cascadebench validate-data --config exp.json
    cascadebench make-fixture --out fixtures/synthetic

Failures exit with status 1 and a JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .data import DataError
from .runner import (
    SWEEP_C_VALUES,
    ExperimentConfig,
    SimulationError,
    _resolve_output_dir,
    prepare_inputs,
    run_experiment,
    sweep_exploration,
)
from .synthetic import generate_long_tail_dataset


def _c_values(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad c list {text!r}") from exc
    if not values or any(v < 0 for v in values):
        raise argparse.ArgumentTypeError("c values must be non-negative")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cascadebench", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the configured algorithm x seed grid")
    p.add_argument("--config", required=True, type=Path)

    p = sub.add_parser("sweep", help="sweep the exploration coefficient")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--c", type=_c_values, default=list(SWEEP_C_VALUES))

    p = sub.add_parser("validate-data", help="preprocess the dataset and report its statistics")
    p.add_argument("--config", required=True, type=Path)

    p = sub.add_parser("make-fixture", help="write the synthetic long-tail dataset")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--seed", type=int, default=7)
    return parser


def _run(args: argparse.Namespace) -> dict:
    if args.command == "make-fixture":
        paths = generate_long_tail_dataset(args.out, seed=args.seed)
        return {k: str(v) for k, v in paths.items()}

    config = ExperimentConfig.from_json(args.config)
    out_dir = _resolve_output_dir(config)
    if args.command == "validate-data":
        inputs = prepare_inputs(replace(config, output_dir=str(out_dir)))
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "split_report.json").write_text(inputs.dataset.split_report.to_json() + "\n")
        return {"dataset": inputs.dataset.summary(), "split_report": str(out_dir / "split_report.json")}
    if args.command == "run":
        result = run_experiment(config)
        return {"output_dir": str(result.output_dir), "runs": len(result.runs)}
    results = sweep_exploration(config, args.c)
    return {"output_dir": str(out_dir), "runs": sum(len(r.runs) for r in results.values())}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        report = _run(args)
    except SimulationError as err:
        print(json.dumps(err.to_dict()), file=sys.stderr)
        return 1
    except (DataError, ValueError, KeyError, OSError) as err:
        print(json.dumps({"error": f"{type(err).__name__}: {err}"}), file=sys.stderr)
        return 1
    print(json.dumps(report, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
