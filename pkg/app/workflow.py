# workflow.py

import logging
from pathlib import Path
from typing import Any, Mapping, Union

from langgraph.graph import END, StateGraph

from app.graph import (
    EXIT_FAILED,
    reject_node,
    render_node,
    test_node,
    train_node,
    validate_node,
)
from app.state import QueryState
from app.system import HolarchySystem

logger = logging.getLogger(__name__)


# Router ---------------------------------------------------------------------------


def next_step_router(state: QueryState) -> str:
    """
    Determines the NEXT node to execute.
    This router is executed AFTER a node runs.
    """
    logger.debug("[NEXT_STEP_ROUTER] Called with state.step: %s", state.step)
    return state.step


def route_start(state: QueryState) -> str:
    """
    Determines the entry point based on the current step.
    A state that already carries a parsed query resumes at its dispatch node.
    """
    if state.step in {"TRAIN", "TEST", "RENDER"} and state.parsed is not None:
        logger.info("[ROUTE_START] Resuming at %s", state.step)
        return state.step
    return "VALIDATE"


# Graph Builder ---------------------------------------------------------------------------


def build_graph():
    graph = StateGraph(QueryState)

    # Nodes
    graph.add_node("VALIDATE", validate_node)
    graph.add_node("TRAIN", train_node)
    graph.add_node("TEST", test_node)
    graph.add_node("REJECT", reject_node)
    graph.add_node("RENDER", render_node)

    # Dynamic Entry Point
    graph.set_conditional_entry_point(
        route_start,
        {
            "VALIDATE": "VALIDATE",
            "TRAIN": "TRAIN",
            "TEST": "TEST",
            "RENDER": "RENDER",
        },
    )

    graph.add_conditional_edges(
        "VALIDATE",
        next_step_router,
        {
            "TRAIN": "TRAIN",
            "TEST": "TEST",
            "REJECT": "REJECT",
        },
    )
    graph.add_edge("TRAIN", "RENDER")
    graph.add_edge("TEST", "RENDER")
    graph.add_edge("REJECT", END)
    graph.add_edge("RENDER", END)

    return graph.compile()


# Compiled Graph ---------------------------------------------------------------------------

query_graph = build_graph()


# Public Runner ---------------------------------------------------------------------------


async def run_query(
    system: HolarchySystem,
    raw: Union[str, bytes, Mapping[str, Any]],
    out_dir: Union[str, Path],
) -> QueryState:
    """
    Runs one query file through VALIDATE -> TRAIN | TEST | REJECT -> RENDER.
    """
    state = QueryState(raw=raw)
    try:
        result = await query_graph.ainvoke(
            state,
            config={
                "recursion_limit": 10,
                "configurable": {"system": system, "out_dir": str(out_dir)},
            },
        )
    except Exception:
        logger.exception("Query workflow failed")
        return state.model_copy(update={"step": "END", "exit_code": EXIT_FAILED})

    final = QueryState.model_validate(result)
    logger.info("[RUN_QUERY] %s finished with exit code %d", final.query_id, final.exit_code)
    return final
