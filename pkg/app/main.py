"""
main.py

Command-line entry point for the holarchy runtime (`python -m app.main`).

Every invocation builds a fresh holarchy. Commands that work on existing state
(`query`, `export`, `add-alg`, `add-data`) first replay a scenario given with
`--scenario`, which is how a run is reproduced in deterministic mode.

Exit codes: 0 ok, 1 step failure, 2 configuration, 3 query validation, 4 assert failure.
"""

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, TextIO

from pydantic import ValidationError

from app.config import Settings, settings
from app.frontend.hops import run_bound_suite
from app.frontend.schemas import ResourceFile
from app.frontend.validators import QueryValidationError, load_model
from app.scenario import ScenarioError, ScenarioRunner, load_scenario
from app.system import HolarchySystem, add_resource_file
from app.utils.logger import setup_logging
from app.workflow import run_query

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_INVALID = 3
EXIT_ASSERT = 4

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


class ConfigError(Exception):
    """Raised when settings, scenario or resource files cannot be used."""


# Arguments --------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="holarchy", description="Holonic multi-agent ML runtime")
    parser.add_argument("--seed", type=int, help="scheduler and learner seed")
    parser.add_argument(
        "--deterministic",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="single-threaded seeded scheduler (default from settings)",
    )
    parser.add_argument("--trace", help="write every envelope as a JSON line to this file")
    parser.add_argument("--out", help="report root (default: $HAMLET_OUT or OUT_DIR)")
    parser.add_argument("--alpha", type=float, help="similarity factor for a * pair")
    parser.add_argument("--beta", type=float, help="similarity factor for two different literals")
    parser.add_argument("--strict-cfp", action="store_true", default=None, help="collect every proposal")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING, ERROR")

    sub = parser.add_subparsers(dest="command", required=True)

    bootstrap = sub.add_parser("bootstrap", help="create SYS, ALG and DATA and print the snapshot")
    bootstrap.add_argument("--preload", action="store_true", help="add the 24 catalogue algorithms")

    for name, kind in (("add-alg", "algorithm"), ("add-data", "data")):
        add = sub.add_parser(name, help=f"add an {kind} resource spec file")
        add.add_argument("spec", help="resource spec JSON file")
        add.add_argument("--scenario", help="scenario to replay first")

    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("scenario")

    query = sub.add_parser("query", help="run a training or test query file")
    query.add_argument("query")
    query.add_argument("--scenario", help="scenario to replay first")

    export = sub.add_parser("export", help="print the holarchy structure")
    export.add_argument("--format", choices=("dot", "json"), default="dot")
    export.add_argument("--no-models", action="store_true", help="hide model holons (DOT only)")
    export.add_argument("--scenario", help="scenario to replay first")
    export.add_argument("--output", help="write to this file instead of stdout")

    hops = sub.add_parser("hops", help="check routing message counts against their bounds")
    hops.add_argument("--branching", type=int, nargs="+", default=[2, 3, 4])
    hops.add_argument("--sizes", type=int, nargs="+", default=[4, 16, 64, 256])
    hops.add_argument("--deep-sizes", type=int, nargs="+", default=[4, 16, 64])

    workload = sub.add_parser("workload", help="24 algorithms, 9 datasets, 120 trainings, 4 tests")
    workload.add_argument("--scenario", default=str(SCENARIO_DIR / "workload.json"))
    return parser


def overrides_from(args: argparse.Namespace) -> Dict[str, Any]:
    values = {
        "SEED": args.seed,
        "DETERMINISTIC": args.deterministic,
        "SIM_ALPHA": args.alpha,
        "SIM_BETA": args.beta,
        "STRICT_CFP": args.strict_cfp,
        "TRACE_FILE": args.trace,
        "OUT_DIR": args.out,
    }
    return {key: value for key, value in values.items() if value is not None}


def build_settings(base: Settings, overrides: Dict[str, Any]) -> Settings:
    try:
        return Settings(**{**base.model_dump(), **overrides})
    except ValidationError as e:
        raise ConfigError("; ".join(err["msg"] for err in e.errors())) from e


# Session --------------------------------


class Session:
    """One fresh holarchy, optionally primed by a scenario replay."""

    def __init__(self, args: argparse.Namespace) -> None:
        self.args = args
        self.overrides = overrides_from(args)
        self.config = build_settings(settings, self.overrides)
        self.system: Optional[HolarchySystem] = None

    @property
    def out_dir(self) -> Path:
        return Path(self.config.OUT_DIR)

    def _trace_sink(self) -> Optional[TextIO]:
        if not self.config.TRACE_FILE:
            return None
        path = Path(self.config.TRACE_FILE)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", encoding="utf-8")

    async def open(self, scenario_path: Optional[str] = None) -> HolarchySystem:
        scenario = None
        if scenario_path:
            try:
                scenario = load_scenario(scenario_path)
            except QueryValidationError as e:
                raise ConfigError(f"{scenario_path}: " + "; ".join(str(d) for d in e.diagnostics)) from e
            # settings < scenario < command-line flags
            try:
                primed = scenario.apply(settings)
            except ValidationError as e:
                raise ConfigError("; ".join(err["msg"] for err in e.errors())) from e
            self.config = build_settings(primed, self.overrides)
        sink = self._trace_sink()
        try:
            self.system = HolarchySystem(self.config, trace_sink=sink)
        except Exception:
            if sink is not None:
                sink.close()
            raise
        if scenario is not None:
            await ScenarioRunner(self.system, Path(scenario_path).parent, self.out_dir).run(scenario)
        return self.system

    def close(self) -> None:
        if self.system is not None:
            self.system.close()


def _emit(text: str, output: Optional[str] = None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
        logger.info("[CLI] wrote %s", output)
    else:
        sys.stdout.write(text)


def _resource(path: str, kind: str) -> ResourceFile:
    try:
        resource = load_model(ResourceFile, Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    except QueryValidationError as e:
        raise ConfigError(f"{path}: " + "; ".join(str(d) for d in e.diagnostics)) from e
    if resource.kind != kind:
        raise ConfigError(f"{path} describes a {resource.kind} resource, expected {kind}")
    return resource


# Commands --------------------------------


async def cmd_bootstrap(session: Session) -> int:
    system = await session.open()
    if session.args.preload:
        for number in range(1, 25):
            system.add_algorithm(f"A{number:02d}", query_id=f"add-A{number:02d}")
            await system.settle()
    _emit(json.dumps(system.snapshot(), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


async def cmd_add(session: Session, kind: str) -> int:
    resource = _resource(session.args.spec, kind)
    system = await session.open(session.args.scenario)
    query_id = add_resource_file(system, resource, Path(session.args.spec).parent)
    await system.settle()
    outcome = system.outcome(query_id)
    if outcome.errors:
        for error in outcome.errors:
            logger.error("[CLI] %s", error)
        return EXIT_FAILED
    _emit(f"{query_id}: {resource.name} -> {outcome.holon}\n")
    return EXIT_OK


async def cmd_run(session: Session) -> int:
    system = await session.open(session.args.scenario)
    logger.info("[CLI] scenario done, %d holons", len(system.holons()))
    return EXIT_OK


async def cmd_query(session: Session) -> int:
    path = Path(session.args.query)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    system = await session.open(session.args.scenario)
    state = await run_query(system, raw, session.out_dir)
    for diagnostic in state.diagnostics:
        sys.stderr.write(f"{path}: {diagnostic}\n")
    for file in state.files:
        _emit(f"{file}\n")
    return state.exit_code


async def cmd_export(session: Session) -> int:
    system = await session.open(session.args.scenario)
    if session.args.format == "dot":
        text = system.export_dot(include_models=not session.args.no_models)
    else:
        text = json.dumps(system.snapshot(), indent=2, sort_keys=True) + "\n"
    _emit(text, session.args.output)
    return EXIT_OK


async def cmd_hops(session: Session) -> int:
    args = session.args
    report = run_bound_suite(session.config, args.branching, args.sizes, args.deep_sizes)
    _emit(report.render())
    return EXIT_OK if report.ok else EXIT_ASSERT


async def cmd_workload(session: Session) -> int:
    await session.open(session.args.scenario)
    return EXIT_OK


COMMANDS = {
    "bootstrap": cmd_bootstrap,
    "add-alg": lambda session: cmd_add(session, "algorithm"),
    "add-data": lambda session: cmd_add(session, "data"),
    "run": cmd_run,
    "query": cmd_query,
    "export": cmd_export,
    "hops": cmd_hops,
    "workload": cmd_workload,
}


async def run_command(args: argparse.Namespace) -> int:
    session: Optional[Session] = None
    try:
        session = Session(args)
        return await COMMANDS[args.command](session)
    except ConfigError as e:
        logger.error("[CLI] configuration: %s", e)
        return EXIT_CONFIG
    except ScenarioError as e:
        logger.error("[CLI] %s", e)
        return e.exit_code
    except Exception:
        logger.exception("[CLI] %s failed", args.command)
        return EXIT_FAILED
    finally:
        if session is not None:
            session.close()


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        setup_logging(args.log_level)
    except ValueError as e:
        sys.stderr.write(f"{e}\n")
        return EXIT_CONFIG
    return asyncio.run(run_command(args))


if __name__ == "__main__":
    sys.exit(main())
