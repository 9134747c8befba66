"""
holons.py

Concrete holons and the bootstrap.

Responsibilities:
- Holon: one class for abstract, algorithm, data and model holons; the kind in
  its state decides which handlers apply
- SystemHolon: entry point for every query, keeps the outcome of each one
- bootstrap(): SYS plus the ALG and DATA roots
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from app.holarchy.base import HolarchyContext, handles
from app.holarchy.construction import ConstructionMixin
from app.holarchy.queries import (
    InsertMode,
    InsertRequest,
    QueryOutcome,
    ResultRow,
    TestQuery,
    TrainingQuery,
)
from app.holarchy.state import (
    ALG_ID,
    DATA_ID,
    SYS_ID,
    EntityKind,
    HolonId,
    HolonKind,
    HolonState,
    holon_order,
)
from app.holarchy.testing import TestingMixin
from app.holarchy.training import TrainingMixin
from app.runtime.messages import Envelope, Performative

logger = logging.getLogger(__name__)

ALGORITHM_SIDE = "algorithm"
DATA_SIDE = "data"


class Holon(ConstructionMixin, TrainingMixin, TestingMixin):
    """Abstract, algorithm, data or model holon."""


@dataclass
class TrainingState:
    query: TrainingQuery
    # side -> root that reported the address, side -> final destination
    addresses: Dict[str, HolonId] = field(default_factory=dict)
    destinations: Dict[str, HolonId] = field(default_factory=dict)
    duplicate: bool = False
    released: bool = False
    dispatched: bool = False


def row_order(row: ResultRow):
    return (
        row.dataset_name,
        holon_order(row.algorithm_id),
        row.measure,
        holon_order(row.dataset_holon or ""),
        holon_order(row.model_id or ""),
    )


class SystemHolon(Holon):
    """
    Holon 0. Accepts ADD / TRAIN / RELEASE / TEST asks and turns the replies
    into QueryOutcome records.
    """

    def __init__(self, ctx: HolarchyContext, state: HolonState, kb: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(ctx, state, kb)
        self.outcomes: Dict[str, QueryOutcome] = {}
        self.trainings: Dict[str, TrainingState] = {}
        self.tests: Dict[str, TestQuery] = {}

    def outcome(self, query_id: str) -> QueryOutcome:
        return self.outcomes[query_id]

    def report_failure(self, conversation_id: str, message: str) -> List[Envelope]:
        self._fail(conversation_id, message)
        return []

    def _fail(self, query_id: str, message: str) -> None:
        outcome = self.outcomes.get(query_id)
        if outcome is None:
            logger.error("%s failure outside any query (%s): %s", self.tag, query_id, message)
            return
        logger.error("%s query %s failed: %s", self.tag, query_id, message)
        outcome.errors.append(message)
        outcome.done = True

    def _warn(self, outcome: QueryOutcome, message: str) -> None:
        logger.warning("%s %s: %s", self.tag, outcome.query_id, message)
        outcome.warnings.append(message)

    @staticmethod
    def root_for(kind: EntityKind) -> HolonId:
        return ALG_ID if kind is EntityKind.ALGORITHM else DATA_ID

    # Add --------------------------------

    @handles(Performative.ASK, "ADD")
    def on_add(self, env: Envelope) -> List[Envelope]:
        request: InsertRequest = env.payload["request"]
        self.outcomes[request.query_id] = QueryOutcome(request.query_id, "add")
        logger.info("%s add %s", self.tag, request.spec)
        return [self.ask(self.root_for(request.spec.entity_kind), request.query_id, "ADD", request=request)]

    @handles(Performative.INFORM, "INSERTED")
    def on_inserted(self, env: Envelope) -> List[Envelope]:
        outcome = self.outcomes.get(env.conversation_id)
        if outcome is None:
            return []
        outcome.holon = env.payload["holon"]
        if env.payload.get("existing"):
            self._warn(outcome, f"resource already present as holon {outcome.holon}; nothing inserted")
        outcome.done = True
        return []

    @handles(Performative.INFORM, "FAILED")
    def on_failed(self, env: Envelope) -> List[Envelope]:
        self._fail(env.conversation_id, env.payload["error"])
        return []

    # Train --------------------------------

    @handles(Performative.ASK, "TRAIN")
    def on_train(self, env: Envelope) -> List[Envelope]:
        query: TrainingQuery = env.payload["query"]
        cid = query.query_id
        self.outcomes[cid] = QueryOutcome(cid, "train")
        self.trainings[cid] = TrainingState(query)
        logger.info("%s train %s on %s", self.tag, query.algorithm, query.dataset)
        alg = InsertRequest(query.algorithm, cid, InsertMode.TRAIN_FIRST_PASS, companion=query.dataset)
        data = InsertRequest(
            query.dataset,
            cid,
            InsertMode.TRAIN_FIRST_PASS,
            companion=query.algorithm,
            resource=env.payload.get("resource"),
        )
        return [
            self.ask(ALG_ID, cid, "TRAIN FIRST PASS", request=alg),
            self.ask(DATA_ID, cid, "TRAIN FIRST PASS", request=data),
        ]

    @handles(Performative.ASK, "INFORM-ADDRESS")
    def on_address_arrived(self, env: Envelope) -> List[Envelope]:
        cid = env.conversation_id
        training = self.trainings.get(cid)
        if training is None:
            logger.warning("%s address for unknown training %s", self.tag, cid)
            return []
        payload = env.payload
        side = ALGORITHM_SIDE if payload["origin"] == ALG_ID else DATA_SIDE
        training.addresses[side] = payload["origin"]
        training.destinations[side] = payload["destination"]
        training.duplicate = training.duplicate or payload["duplicate"]
        return self.second_pass(cid, training)

    @handles(Performative.ASK, "RELEASE")
    def on_release(self, env: Envelope) -> List[Envelope]:
        cid = env.conversation_id
        training = self.trainings.get(cid)
        if training is None:
            logger.warning("%s nothing held under %s", self.tag, cid)
            return []
        training.released = True
        return self.second_pass(cid, training)

    def second_pass(self, cid: str, training: TrainingState) -> List[Envelope]:
        if len(training.addresses) < 2 or training.dispatched or self.outcomes[cid].done:
            return []
        model = training.destinations[ALGORITHM_SIDE]
        if training.duplicate:
            training.dispatched = True
            query = training.query
            self._warn(
                self.outcomes[cid],
                f"{query.algorithm} was already trained on {query.dataset} (model {model}); "
                "reporting the recorded results",
            )
            return [self.ask(model, cid, "REPORT")]
        return self.dispatch(cid, training)

    def dispatch(self, cid: str, training: TrainingState) -> List[Envelope]:
        if training.query.hold and not training.released:
            logger.info("%s training %s held until release", self.tag, cid)
            return []
        training.dispatched = True
        model = training.destinations[ALGORITHM_SIDE]
        data = training.destinations[DATA_SIDE]
        return [
            self.ask(ALG_ID, cid, "TRAIN SECOND PASS", role="model", companion=data, measures=training.query.output.measures),
            self.ask(DATA_ID, cid, "TRAIN SECOND PASS", role="data", companion=model),
        ]

    @handles(Performative.RESULT, "TRAINED")
    def on_training_result(self, env: Envelope) -> List[Envelope]:
        outcome = self.outcomes.get(env.conversation_id)
        if outcome is None:
            return []
        outcome.rows.extend(sorted(env.payload["rows"], key=row_order))
        if env.payload.get("error"):
            outcome.errors.append(env.payload["error"])
        outcome.done = True
        return []

    @handles(Performative.RESULT, "REPORT")
    def on_report_result(self, env: Envelope) -> List[Envelope]:
        cid = env.conversation_id
        outcome = self.outcomes.get(cid)
        if outcome is None:
            return []
        if not env.payload.get("trained"):
            # earlier attempt never fitted: train it now
            training = self.trainings[cid]
            training.duplicate = False
            training.dispatched = False
            outcome.warnings.clear()
            logger.info("%s model %s holds no fit yet, training it", self.tag, env.sender)
            return self.dispatch(cid, training)
        outcome.rows.extend(sorted(env.payload["rows"], key=row_order))
        outcome.done = True
        return []

    # Test --------------------------------

    @handles(Performative.ASK, "TEST")
    def on_test_query(self, env: Envelope) -> List[Envelope]:
        query: TestQuery = env.payload["query"]
        cid = query.query_id
        self.outcomes[cid] = QueryOutcome(cid, "test")
        self.tests[cid] = query
        logger.info("%s test %s x %s", self.tag, query.algorithm_criteria, query.data_criteria)
        return [self.ask(DATA_ID, cid, "RESOLVE", criteria=query.data_criteria)]

    @handles(Performative.RESULT, "RESOLVED")
    def on_datasets_resolved(self, env: Envelope) -> List[Envelope]:
        cid = env.conversation_id
        outcome = self.outcomes.get(cid)
        if outcome is None:
            return []
        query = self.tests[cid]
        datasets = tuple(sorted(env.payload["datasets"], key=lambda d: holon_order(d.holon)))
        if not datasets:
            self._warn(outcome, f"no dataset matches {query.data_criteria}; no result exists")
            outcome.done = True
            return []
        logger.info("%s %s resolved %d dataset(s)", self.tag, cid, len(datasets))
        return [self.ask(ALG_ID, cid, "TEST", query=query, datasets=datasets)]

    @handles(Performative.RESULT, "RESULTS")
    def on_test_results(self, env: Envelope) -> List[Envelope]:
        cid = env.conversation_id
        outcome = self.outcomes.get(cid)
        if outcome is None:
            return []
        rows = sorted(env.payload["rows"], key=row_order)
        outcome.rows.extend(rows)
        outcome.errors.extend(row.error for row in rows if row.error)
        if not rows:
            query = self.tests[cid]
            self._warn(outcome, f"no result exists for {query.algorithm_criteria} x {query.data_criteria}")
        outcome.done = True
        return []


def bootstrap(ctx: HolarchyContext) -> SystemHolon:
    """Register SYS (level 0) and the ALG / DATA roots (level 1)."""
    ctx.holon_factory = Holon
    sys_state = HolonState(SYS_ID, HolonKind.SYS, SYS_ID, level=0)
    system = SystemHolon(ctx, sys_state)
    ctx.runtime.register(system)
    for root in (ALG_ID, DATA_ID):
        ctx.runtime.register(Holon(ctx, HolonState(root, HolonKind.ABSTRACT, root, level=1, supers=[SYS_ID])))
        sys_state.subs.add(root)
    logger.info("[HOLARCHY] bootstrapped SYS, %s and %s", ALG_ID, DATA_ID)
    return system
