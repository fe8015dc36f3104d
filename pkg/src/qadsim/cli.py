"""Command-line batch runner for the simulation and analysis pipelines."""

import argparse
import json
import sys

from .errors import (
    CalibrationError,
    ConfigError,
    ConvergenceError,
    FormatError,
    QadsimError,
    ResolutionError,
    SolverError,
    StabilityError,
)

_COMMAND_TO_EXPERIMENT = {
    "chevron": "chevron",
    "rabi-basis": "rabi_basis",
    "ladder": "ladder",
    "calibrate-displacement": "displacement_calibration",
    "wigner": "wigner",
    "reconstruct": "reconstruct",
    "modes": "modes",
}

_ERROR_CATEGORIES = [
    (ConfigError, "config_validation", 2),
    (FormatError, "data_format", 3),
    ((SolverError, ConvergenceError), "solver", 4),
    ((CalibrationError, StabilityError, ResolutionError), "model", 5),
    (QadsimError, "validation", 3),
    (OSError, "io", 6),
]


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qadsim",
        description="Qubit-phonon experiment simulator: pulse protocols, "
        "Wigner tomography, state reconstruction, and acoustic mode solving.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command in _COMMAND_TO_EXPERIMENT:
        p = sub.add_parser(command, help=f"run the {command} pipeline")
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--output-dir", default=None, help="directory for CSV results")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument(
            "--workers", type=int, default=None, help="parallel workers for grid scans"
        )
    p = sub.add_parser("import", help="validate and standardize measured traces")
    p.add_argument("path", help="CSV file: time column plus one column per trace")
    p.add_argument("--output-dir", default=None, help="re-export standardized traces here")
    p.add_argument(
        "--resample-points",
        type=int,
        default=None,
        help="linear-interpolate onto a uniform grid with this many points",
    )
    return parser


def _fail(exc):
    for types, category, code in _ERROR_CATEGORIES:
        if isinstance(exc, types):
            print(
                json.dumps({"error": {"category": category, "message": str(exc)}}),
                file=sys.stderr,
            )
            return code
    raise exc


def _run_import(args):
    from .io import export_bundle, import_trace_data, ResultBundle, traces_to_table

    traces = import_trace_data(args.path, resample_points=args.resample_points)
    print(f"imported {len(traces)} trace(s), {traces[0].times.size} samples each")
    if args.output_dir:
        bundle = ResultBundle(
            manifest={"experiment": "import", "source": args.path},
            tables={"imported_traces": traces_to_table(traces)},
        )
        for path in export_bundle(bundle, args.output_dir):
            print(f"wrote {path}")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "import":
            return _run_import(args)
        from .config import load_config
        from .io import export_bundle
        from .pipelines import run_experiment

        config = load_config(args.config, _COMMAND_TO_EXPERIMENT[args.command])
        if args.seed is not None:
            config.seed = args.seed
        if args.workers is not None:
            config.workers = args.workers
        if args.output_dir is not None:
            config.output_dir = args.output_dir
        bundle = run_experiment(config)
        for key, value in sorted(bundle.summary.items()):
            print(f"{key} = {value}")
        if config.output_dir:
            for path in export_bundle(bundle, config.output_dir):
                print(f"wrote {path}")
        return 0
    except Exception as exc:  # noqa: BLE001 - single reporting point
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
