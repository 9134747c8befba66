import logging
from pathlib import Path

from langchain_core.runnables import RunnableConfig

from app.frontend.render import render
from app.frontend.validators import QueryValidationError, parse_and_validate
from app.state import QueryState
from app.system import HolarchySystem

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 3


def _system(config: RunnableConfig) -> HolarchySystem:
    return config["configurable"]["system"]


def _out_dir(config: RunnableConfig) -> Path:
    return Path(config["configurable"]["out_dir"])


# Nodes --------------------------------


async def validate_node(state: QueryState, config: RunnableConfig) -> dict:
    logger.info("[VALIDATE_NODE] Executing")
    system = _system(config)
    try:
        parsed = parse_and_validate(state.raw, system.registry, system.schemas)
    except QueryValidationError as e:
        logger.warning("[VALIDATE_NODE] %d diagnostic(s)", len(e.diagnostics))
        return {"step": "REJECT", "diagnostics": [str(d) for d in e.diagnostics]}

    step = "TRAIN" if parsed.task == "train" else "TEST"
    logger.info("[VALIDATE_NODE] %s is a %s query, moving to %s", parsed.query_id, parsed.task, step)
    return {"step": step, "parsed": parsed, "query_id": parsed.query_id, "task": parsed.task}


async def _dispatch(state: QueryState, config: RunnableConfig, node: str) -> dict:
    system = _system(config)
    ids = []
    # one operation at a time: expanded pairs never race each other's inserts
    for operation in state.parsed.operations:
        ids.append(system.submit_one(operation))
        await system.settle()
    logger.info("[%s_NODE] %d operation(s) settled for %s", node, len(ids), state.query_id)
    return {"step": "RENDER", "operation_ids": ids}


async def train_node(state: QueryState, config: RunnableConfig) -> dict:
    return await _dispatch(state, config, "TRAIN")


async def test_node(state: QueryState, config: RunnableConfig) -> dict:
    return await _dispatch(state, config, "TEST")


async def reject_node(state: QueryState, config: RunnableConfig) -> dict:
    for diagnostic in state.diagnostics:
        logger.error("[REJECT_NODE] %s", diagnostic)
    return {"step": "END", "exit_code": EXIT_INVALID}


async def render_node(state: QueryState, config: RunnableConfig) -> dict:
    logger.info("[RENDER_NODE] Executing for %s", state.query_id)
    system = _system(config)
    report = system.report(state.query_id, state.operation_ids, state.parsed.output)
    files = [str(path) for path in render(report, _out_dir(config))]

    failed = report.incomplete or (bool(report.errors) and not report.rows)
    if failed:
        logger.error("[RENDER_NODE] %s finished without results: %s", state.query_id, report.errors or "incomplete")
    return {
        "step": "END",
        "report": report,
        "files": files,
        "exit_code": EXIT_FAILED if failed else EXIT_OK,
    }
