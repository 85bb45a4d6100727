"""Command-line entry point: ``gna-workbench <subcommand> [options]``.

Every subcommand accepts ``--config`` (YAML or JSON) plus flag overrides and
writes its artifacts and ``manifest.json`` under ``--out``. Failures exit
with the category code of the raised error.
"""

import argparse
import json
import logging
import sys

import yaml

from app.core.config import get_settings
from app.core.errors import WorkbenchError
from app.core.experiments import load_experiment, run_experiment

logger = logging.getLogger("workbench.cli")


def _param(text: str) -> tuple[str, object]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key, yaml.safe_load(value)


def _common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="YAML or JSON experiment file")
    sub.add_argument("--seed", type=int, help="root seed (required for stochastic runs)")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--format", choices=["snapshot", "csv"], help="artifact format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gna-workbench",
        description="Simulate, discover and analyze adaptive networks.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="run a model-zoo model through the engine")
    _common(sim)
    sim.add_argument("--model", help="registered model name (see `models`)")
    sim.add_argument("--param", action="append", type=_param, default=[], metavar="KEY=VALUE",
                     help="model parameter override, repeatable")
    sim.add_argument("--steps", type=int, help="number of rewriting steps")

    disc = subs.add_parser("discover", help="fit extraction and replacement mechanisms to a trajectory")
    _common(disc)
    disc.add_argument("--trace", help="trajectory file in the workbench text format")
    disc.add_argument("--graphml", nargs="+", help="GraphML snapshots in time order")
    disc.add_argument("--mode", choices=["deterministic", "stochastic"])
    disc.add_argument("--candidates", nargs="+", help="extraction families to compare")
    disc.add_argument("--steps", type=int, help="reconstruction length (defaults to the trace length)")

    op = subs.add_parser("opnet", help="form an operational network from a scenario")
    _common(op)
    op.add_argument("--scenario", help="scenario YAML file")
    op.add_argument("--max-ticks", type=int, dest="max_ticks")

    mg = subs.add_parser("merger", help="post-merger integration sweep")
    _common(mg)
    mg.add_argument("--iterations", type=int)
    mg.add_argument("--runs", type=int, help="runs per (w, b) condition")

    an = subs.add_parser("analyze", help="network metrics on snapshot files")
    _common(an)
    an.add_argument("inputs", nargs="*", help="snapshot files")

    subs.add_parser("models", help="list registered models")

    srv = subs.add_parser("serve", help="start the HTTP job service")
    srv.add_argument("--host", default="0.0.0.0")
    srv.add_argument("--port", type=int)
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    overrides = {"seed": args.seed, "out": args.out, "format": args.format}
    command = args.command
    if command == "simulate":
        overrides.update(model=args.model, steps=args.steps)
        if args.param:
            overrides["params"] = dict(args.param)
    elif command == "discover":
        overrides.update(
            trace=args.trace, graphml=args.graphml, mode=args.mode,
            candidates=args.candidates, steps=args.steps,
        )
    elif command == "opnet":
        overrides.update(scenario=args.scenario, max_ticks=args.max_ticks)
    elif command == "merger":
        overrides["iterations"] = args.iterations
        if args.runs is not None:
            overrides["sweep"] = {"runs": args.runs}
    elif command == "analyze":
        overrides["inputs"] = args.inputs or None
    return overrides


def _serve(args: argparse.Namespace) -> int:
    import uvicorn

    port = args.port or get_settings().PORT
    uvicorn.run("app.main:app", host=args.host, port=port)
    return 0


def _models() -> int:
    from app.core.zoo import list_models

    for entry in list_models():
        print(f"{entry['name']:<14} {entry['description']}")
        print(f"{'':<14} {json.dumps(entry['params'], sort_keys=True)}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    logging.basicConfig(
        level=logging.DEBUG if (settings.DEBUG or args.verbose) else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )
    if args.command == "serve":
        return _serve(args)
    if args.command == "models":
        return _models()
    try:
        cfg = load_experiment(args.config, args.command, _overrides(args))
        result = run_experiment(cfg)
    except WorkbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception:
        logger.exception("Unexpected failure in %s", args.command)
        return 1
    logger.info("%s finished: %s", args.command, ", ".join(sorted(result.artifacts)))
    print(result.out_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
