"""Batch entry point: ``latticeq <subcommand> --config run.json [flags]``.

Exit codes: 0 success, 1 invalid input or failed precondition, 2 numeric
failure, 3 resource cap exceeded. Failures are reported as one JSON line on
stderr.
"""

import argparse
import importlib.util
import json
import logging
import logging.config
import sys
from pathlib import Path

from apps.cli.forms import load_config
from apps.cli.models import RunContext
from apps.cli.routing import resolve, subcommand_patterns
from apps.shared.exceptions import ApplicationError, ConfigurationError
from apps.shared.exporters import manifest_write
from config import override_settings, settings

logger = logging.getLogger(__name__)

RESOURCE_SETTINGS = {
    "max_sites": "MAX_SITES",
    "max_wall_seconds": "MAX_WALL_SECONDS",
    "dense_size_cap": "DENSE_SIZE_CAP",
}


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message, {"fields": {"argv": [message]}})


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="latticeq", description="Numerical experiments on lattice Schrodinger operators."
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    for view in subcommand_patterns:
        sub = subparsers.add_parser(
            view.name,
            help=view.help,
            description=view.help,
            epilog=f"CSV columns:\n{view.columns}",
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        sub.add_argument("--config", required=True, type=Path, help="experiment JSON file")
        sub.add_argument("--out", type=Path, help="run directory (default: output.directory or OUTPUT_DIR)")
        sub.add_argument("--threads", type=int, help="worker threads (default: LATTICEQ_THREADS)")
        sub.add_argument("--seed", type=int, help="disorder seed, replaces model.seed")
        sub.add_argument(
            "--override", action="append", default=[], metavar="KEY=VALUE",
            help="set a dotted config key, e.g. model.width=4 (repeatable)",
        )
        sub.add_argument("--profile", help="settings module, e.g. config.profiles.production")
    return parser


def _resolved_tolerances(config: dict) -> dict:
    tolerances = config["tolerances"]
    return {
        "time_tol": tolerances["time_tol"] or settings.PROPAGATION_TOL,
        "solve_tol": tolerances["solve_tol"] or settings.SOLVER_TOL,
        "containment": tolerances["containment"] or settings.CONTAINMENT_POLICY,
    }


def execute(args) -> int:
    view_class = resolve(args.subcommand)
    config = load_config(path=args.config, overrides=args.override, seed=args.seed)
    threads = settings.THREADS if args.threads is None else args.threads
    if threads < 1:
        raise ConfigurationError("--threads must be at least 1.", {"fields": {"--threads": [str(threads)]}})
    out_dir = Path(args.out or config["output"]["directory"] or settings.OUTPUT_DIR)
    plots = settings.EMIT_PLOTS if config["output"]["plots"] is None else config["output"]["plots"]
    caps = {
        name: config["resources"][key]
        for key, name in RESOURCE_SETTINGS.items()
        if config["resources"][key] is not None
    }

    with override_settings(THREADS=threads, **caps):
        context = RunContext(out_dir=out_dir, threads=threads, plots=plots)
        manifest = {
            "subcommand": view_class.name,
            "settings_module": settings.module_name,
            "tolerances": _resolved_tolerances(config),
            "resources": {name: getattr(settings, name) for name in RESOURCE_SETTINGS.values()},
            "threads": threads,
        }
        try:
            results = view_class(config=config, context=context).dispatch()
        except ApplicationError as exc:
            manifest_write(
                out_dir / "manifest.json",
                config=config,
                extra={**manifest, "error": exc.as_payload(), "timings": context.timings},
            )
            raise
        manifest_write(
            out_dir / "manifest.json",
            config=config,
            extra={
                **manifest,
                "results": results,
                "timings": context.timings,
                "elapsed": round(context.elapsed, 6),
                "artifacts": context.artifact_names(),
            },
        )
    logger.info("%s wrote %d artifacts to %s", view_class.name, len(context.artifacts), out_dir)
    return 0


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.profile:
            try:
                found = importlib.util.find_spec(args.profile) is not None
            except ModuleNotFoundError:
                found = False
            if not found:
                raise ConfigurationError(
                    f"Settings module {args.profile!r} cannot be imported.",
                    {"fields": {"--profile": [args.profile]}},
                )
            settings.configure(args.profile)
        logging.config.dictConfig(settings.LOGGING)
        return execute(args)
    except ApplicationError as exc:
        sys.stderr.write(json.dumps(exc.as_payload(), sort_keys=True, default=str) + "\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
