"""
testing.py

Test queries.

SYS first resolves the data criteria against the DATA side, then sends the
algorithm criteria plus the resolved datasets down the ALG side. Composites
prune with the parametric inequality and their skills, fan out to every
surviving sub and merge the replies; models fetch the datasets they were
trained for and evaluate.
"""

import logging
from typing import Any, List, Sequence

from app.algebra.operators import leq
from app.algebra.params import ParamSet
from app.holarchy.base import FanOut, HolonBase, handles
from app.holarchy.queries import Criteria, ResolvedDataset, TestQuery
from app.holarchy.state import EntityKind, HolonId, HolonKind, holon_order
from app.ml.learners import LearnerError
from app.ml.metrics import MetricError
from app.ml.registry import EvaluationError
from app.runtime.messages import Envelope, Performative

logger = logging.getLogger(__name__)

EVALUATION_ERRORS = (LearnerError, EvaluationError, MetricError)


def _name_set(name: str) -> ParamSet:
    return ParamSet.of({"name": name})


class TestingMixin(HolonBase):
    # Fan-out --------------------------------

    def fan_out(self, reply_verb: str, key: str, cid: str, asker: HolonId, subs: Sequence[HolonId], verb: str, **payload: Any) -> List[Envelope]:
        if not subs:
            return [self.result(asker, cid, reply_verb, **{key: ()})]
        self.pending[(reply_verb, cid)] = FanOut(asker, set(subs))
        return [self.ask(sub, cid, verb, **payload) for sub in subs]

    def collect(self, env: Envelope, key: str) -> List[Envelope]:
        cid = env.conversation_id
        fan = self.pending.get((env.verb, cid))
        if fan is None or env.sender not in fan.outstanding:
            logger.warning("%s unexpected %s from %s", self.tag, env.verb, env.sender)
            return []
        fan.items.extend(env.payload.get(key, ()))
        fan.outstanding.discard(env.sender)
        if fan.outstanding:
            return []
        del self.pending[(env.verb, cid)]
        return [self.result(fan.asker, cid, env.verb, **{key: tuple(fan.items)})]

    # Data side --------------------------------

    @handles(Performative.ASK, "RESOLVE")
    def on_resolve(self, env: Envelope) -> List[Envelope]:
        criteria: Criteria = env.payload["criteria"]
        cid, asker = env.conversation_id, env.sender
        if not self.data_gate(criteria):
            return [self.result(asker, cid, "RESOLVED", datasets=())]
        if self.state.is_atomic():
            found = ResolvedDataset(self.id, self.state.name, self.state.capability)
            return [self.result(asker, cid, "RESOLVED", datasets=(found,))]
        return self.fan_out("RESOLVED", "datasets", cid, asker, self.state.tree_subs(), "RESOLVE", criteria=criteria)

    def data_gate(self, criteria: Criteria) -> bool:
        if self.state.kind is HolonKind.ABSTRACT:
            return True
        return leq(ParamSet((criteria.name_pair,)), _name_set(self.state.name)) and leq(
            criteria.params, self.state.capability
        )

    @handles(Performative.RESULT, "RESOLVED")
    def on_resolved(self, env: Envelope) -> List[Envelope]:
        return self.collect(env, "datasets")

    @handles(Performative.ASK, "FETCH")
    def on_fetch(self, env: Envelope) -> List[Envelope]:
        cid = env.conversation_id
        if self.kb.get("deny_access") or self.kb.get("dataset") is None:
            logger.warning("%s refused FETCH from %s", self.tag, env.sender)
            return [self.inform(env.sender, cid, "DATA", dataset=None, error=f"{self.state.label} refused access")]
        return [self.inform(env.sender, cid, "DATA", dataset=self.kb["dataset"], error=None)]

    # Algorithm side --------------------------------

    @handles(Performative.ASK, "TEST")
    def on_test(self, env: Envelope) -> List[Envelope]:
        query: TestQuery = env.payload["query"]
        datasets = tuple(env.payload["datasets"])
        cid, asker = env.conversation_id, env.sender
        if self.state.kind is HolonKind.MODEL:
            return self.perform_test(asker, cid, query, datasets)
        if not self.test_gate(query, datasets):
            return [self.result(asker, cid, "RESULTS", rows=())]
        subs = sorted(self.state.subs, key=holon_order)
        return self.fan_out("RESULTS", "rows", cid, asker, subs, "TEST", query=query, datasets=datasets)

    def test_gate(self, query: TestQuery, datasets: Sequence[ResolvedDataset]) -> bool:
        """Prune this subtree unless its name, capability and skills admit the query."""
        if self.state.kind is HolonKind.ABSTRACT:
            return True
        wanted = query.algorithm_criteria
        if not leq(ParamSet((wanted.name_pair,)), _name_set(self.state.name)):
            return False
        if not leq(wanted.params, self.state.capability):
            return False

        trained_on = [s.entity_name for s in self.state.skills if s.entity_kind is EntityKind.DATA]
        if self.ctx.strict_skill_match:
            names = {d.name for d in datasets}
            return any(name in names for name in trained_on)
        data_name = ParamSet((query.data_criteria.name_pair,))
        return any(leq(data_name, _name_set(name)) for name in trained_on)

    @handles(Performative.RESULT, "RESULTS")
    def on_results(self, env: Envelope) -> List[Envelope]:
        return self.collect(env, "rows")

    # Models --------------------------------

    def perform_test(self, asker: HolonId, cid: str, query: TestQuery, datasets: Sequence[ResolvedDataset]) -> List[Envelope]:
        if self.kb.get("fitted") is None:
            return [self.result(asker, cid, "RESULTS", rows=())]
        trained_on = self.kb.get("dataset_name")
        targets = {d.holon: d for d in datasets if d.name == trained_on}
        if not targets:
            return [self.result(asker, cid, "RESULTS", rows=())]
        self.pending[("DATA", cid)] = FanOut(asker, set(targets), payload={"query": query, "targets": targets})
        logger.debug("%s fetching %s", self.tag, sorted(targets, key=holon_order))
        return [self.ask(holon, cid, "FETCH") for holon in sorted(targets, key=holon_order)]

    @handles(Performative.INFORM, "DATA")
    def on_data(self, env: Envelope) -> List[Envelope]:
        cid = env.conversation_id
        fan = self.pending.get(("DATA", cid))
        if fan is None or env.sender not in fan.outstanding:
            logger.warning("%s unexpected DATA from %s", self.tag, env.sender)
            return []

        query: TestQuery = fan.payload["query"]
        target: ResolvedDataset = fan.payload["targets"][env.sender]
        dataset = env.payload.get("dataset")
        if dataset is None:
            rows = [self._error_row(cid, target.name, target.holon, "test", env.payload.get("error") or "no data")]
        else:
            try:
                measurements = self.ctx.registry.evaluate(
                    self.kb["fitted"], dataset, query.output.measures, self.ctx.clock
                )
                rows = self.result_rows(cid, measurements, target.name, target.holon, "test")
            except EVALUATION_ERRORS as e:
                logger.error("%s evaluation on %s failed: %s", self.tag, target.name, e)
                rows = [self._error_row(cid, target.name, target.holon, "test", str(e))]

        fan.items.extend(rows)
        fan.outstanding.discard(env.sender)
        if fan.outstanding:
            return []
        del self.pending[("DATA", cid)]
        return [self.result(fan.asker, cid, "RESULTS", rows=tuple(fan.items))]

