"""
training.py

Two-pass training.

First pass: the atomic algorithm holon spawns (or finds) the model, the atomic
data holon registers itself, and both push their address up to SYS. Second
pass: SYS sends the request back down along the stored addresses; the data
holon grants access, the model joins it as second super, fits, and the new
skills travel back up both sides.
"""

import logging
from typing import Dict, Iterable, List, Optional, Tuple

from app.holarchy.base import HolonBase, handles
from app.holarchy.queries import InsertRequest, ResultRow
from app.holarchy.state import (
    SYS_ID,
    EntityKind,
    HolonId,
    HolonKind,
    SkillEntry,
    StructuralError,
)
from app.ml.learners import LearnerError
from app.ml.metrics import MetricError
from app.ml.registry import EvaluationError, Measurement
from app.runtime.messages import Envelope, Performative

logger = logging.getLogger(__name__)

FIT_ERRORS = (LearnerError, EvaluationError, MetricError)


class TrainingMixin(HolonBase):
    # First pass --------------------------------

    @handles(Performative.ASK, "SPAWN")
    def on_spawn(self, env: Envelope) -> List[Envelope]:
        return self.spawn_model(env.payload["request"])

    def spawn_model(self, request: InsertRequest) -> List[Envelope]:
        """Create the model for (this algorithm, companion dataset) unless it already exists."""
        if self.state.kind is not HolonKind.ALGORITHM or not self.state.is_atomic():
            raise StructuralError(f"only atomic algorithm holons spawn models, not {self.state.label}")
        cid = request.query_id
        dataset = request.companion
        models: Dict[str, HolonId] = self.kb.setdefault("models_by_dataset", {})

        existing = models.get(dataset.key)
        if existing is not None:
            logger.warning("%s already trained on %s (model %s)", self.tag, dataset, existing)
            return self.inform_address(cid, existing, destination=existing, duplicate=True)

        model = self.create_holon(
            self.state.name,
            HolonKind.MODEL,
            capability=self.state.capability,
            kb={
                "algorithm": self.state.name,
                "params": self.state.capability,
                "dataset": dataset,
                "train_rows": [],
                "fitted": None,
            },
        )
        model.state.store_address(cid, model.id)
        models[dataset.key] = model.id
        return self.inform_address(cid, model.id, destination=model.id, duplicate=False)

    @handles(Performative.ASK, "REGISTER")
    def on_register(self, env: Envelope) -> List[Envelope]:
        return self.register_destination(env.payload["request"])

    def register_destination(self, request: InsertRequest) -> List[Envelope]:
        if self.state.kind is not HolonKind.DATA:
            raise StructuralError(f"only data holons register as training destinations, not {self.state.label}")
        return self.inform_address(request.query_id, self.id, destination=self.id, duplicate=False)

    def inform_address(self, cid: str, target: HolonId, destination: HolonId, duplicate: bool) -> List[Envelope]:
        self.state.store_address(cid, target)
        return [
            self.ask(
                self.state.super,
                cid,
                "INFORM-ADDRESS",
                origin=self.id,
                destination=destination,
                duplicate=duplicate,
            )
        ]

    @handles(Performative.ASK, "INFORM-ADDRESS")
    def on_inform_address(self, env: Envelope) -> List[Envelope]:
        payload = env.payload
        forward = self.rerouted(env, payload["origin"])
        if forward is not None:
            return [forward]
        return self.inform_address(env.conversation_id, payload["origin"], payload["destination"], payload["duplicate"])

    # Second pass --------------------------------

    @handles(Performative.ASK, "TRAIN SECOND PASS")
    def on_second_pass(self, env: Envelope) -> List[Envelope]:
        cid = env.conversation_id
        # a model is always the end of its own path, even when reached through a duplicate
        hop = self.id if self.state.kind is HolonKind.MODEL else self.state.get_address(cid)
        if hop != self.id:
            return [self.forward(env, hop)]
        if self.state.kind is HolonKind.DATA:
            return self.grant_access(cid, env.payload["companion"])
        if self.state.kind is HolonKind.MODEL:
            self.kb.setdefault("measures", {})[cid] = tuple(env.payload["measures"])
            return [self.ask(env.payload["companion"], cid, "ACCESS")]
        raise StructuralError(f"{self.state.label} is not a training destination for {cid}")

    def grant_access(self, cid: str, model: HolonId) -> List[Envelope]:
        self.kb.setdefault("grants", {})[cid] = model
        parked = self.kb.setdefault("parked", {}).pop(cid, None)
        if parked is None:
            return []
        return self._answer_access(cid, parked)

    @handles(Performative.ASK, "ACCESS")
    def on_access(self, env: Envelope) -> List[Envelope]:
        cid, model = env.conversation_id, env.sender
        granted = self.kb.setdefault("grants", {}).get(cid)
        if granted is None and not self.kb.get("deny_access"):
            # the model got here before our own second-pass hop
            self.kb.setdefault("parked", {})[cid] = model
            return []
        if granted is not None and granted != model:
            return [self.inform(model, cid, "ACCESS-DENIED", reason=f"{self.state.label} granted {cid} to {granted}")]
        return self._answer_access(cid, model)

    def _answer_access(self, cid: str, model: HolonId) -> List[Envelope]:
        if self.kb.get("deny_access"):
            logger.warning("%s denied data access to %s", self.tag, model)
            return [self.inform(model, cid, "ACCESS-DENIED", reason=f"{self.state.label} refused access")]
        return [
            self.inform(
                model,
                cid,
                "ACCESS-GRANTED",
                dataset=self.kb.get("dataset"),
                name=self.state.name,
                capability=self.state.capability,
            )
        ]

    @handles(Performative.INFORM, "ACCESS-DENIED")
    def on_access_denied(self, env: Envelope) -> List[Envelope]:
        cid = env.conversation_id
        self.kb.get("measures", {}).pop(cid, None)
        dataset = self.kb["dataset"]
        rows = [self._error_row(cid, dataset.name, env.sender, "train", env.payload["reason"])]
        return [self._trained(cid, rows, None, env.payload["reason"])]

    @handles(Performative.INFORM, "ACCESS-GRANTED")
    def on_access_granted(self, env: Envelope) -> List[Envelope]:
        cid = env.conversation_id
        payload = env.payload
        data_holon = env.sender
        algorithm = self.state.super

        # join the data holon as second super
        self.state.supers = [algorithm, data_holon]
        self.state.model_links = (algorithm, data_holon)
        out = [self.inform(data_holon, cid, "MODEL-JOINED", origin=self.id)]

        measures = self.kb.get("measures", {}).pop(cid, ())
        dataset = payload["dataset"]
        try:
            if dataset is None:
                raise LearnerError(f"{payload['name']} holds no data")
            fitted, measurements = self.ctx.registry.fit(
                self.kb["algorithm"], self.kb["params"], dataset, self.ctx.seed, measures, self.ctx.clock
            )
        except FIT_ERRORS as e:
            logger.error("%s training on %s failed: %s", self.tag, payload["name"], e)
            rows = [self._error_row(cid, payload["name"], data_holon, "train", str(e))]
            return out + [self._trained(cid, rows, None, str(e))]

        alg_entry, data_entry = self.record_model_skill(payload["name"], payload["capability"])
        rows = self.result_rows(cid, measurements, payload["name"], data_holon, "train")
        self.kb.update(fitted=fitted, train_rows=rows, dataset_name=payload["name"])
        logger.info("%s trained on %s (%d rows)", self.tag, payload["name"], len(rows))
        out.append(self._trained(cid, rows, data_entry, None))
        out.append(self.inform(data_holon, cid, "SKILL", skill=alg_entry, origin=self.id))
        return out

    def record_model_skill(self, data_name: str, data_capability) -> Tuple[SkillEntry, SkillEntry]:
        """A model's skills are the capabilities of its two supers."""
        if self.state.model_links is None or None in self.state.model_links:
            raise StructuralError(f"{self.state.label} has unresolved super links")
        alg_entry = SkillEntry(EntityKind.ALGORITHM, self.state.name, self.state.capability)
        data_entry = SkillEntry(EntityKind.DATA, data_name, data_capability)
        self.state.skills = {alg_entry, data_entry}
        return alg_entry, data_entry

    def _trained(self, cid: str, rows: List[ResultRow], skill: Optional[SkillEntry], error: Optional[str]) -> Envelope:
        return self.result(self.state.super, cid, "TRAINED", rows=tuple(rows), skill=skill, error=error, origin=self.id)

    # Return path --------------------------------

    @handles(Performative.RESULT, "TRAINED")
    def on_trained(self, env: Envelope) -> List[Envelope]:
        payload = env.payload
        forward = self.rerouted(env, payload["origin"])
        if forward is not None:
            return [forward]
        skill = payload.get("skill")
        if skill is not None:
            self.state.skills.add(skill)
        upward = SYS_ID if self.state.kind is HolonKind.ABSTRACT else self.state.super
        return [
            self.result(
                upward,
                env.conversation_id,
                "TRAINED",
                rows=payload["rows"],
                skill=skill,
                error=payload.get("error"),
                origin=self.id,
            )
        ]

    @handles(Performative.INFORM, "MODEL-JOINED")
    def on_model_joined(self, env: Envelope) -> List[Envelope]:
        model = env.payload["origin"]
        self.state.subs.add(model)
        self.state.model_subs.add(model)
        return []

    @handles(Performative.INFORM, "SKILL")
    def on_skill(self, env: Envelope) -> List[Envelope]:
        payload = env.payload
        forward = self.rerouted(env, payload["origin"])
        if forward is not None:
            return [forward]
        skill = payload["skill"]
        if skill in self.state.skills:
            return []
        self.state.skills.add(skill)
        if (self.state.level or 0) <= 1:
            return []
        return [self.inform(self.state.super, env.conversation_id, "SKILL", skill=skill, origin=self.id)]

    @handles(Performative.ASK, "REPORT")
    def on_report(self, env: Envelope) -> List[Envelope]:
        cid = env.conversation_id
        rows = [row.model_copy(update={"query_id": cid}) for row in self.kb.get("train_rows", [])]
        trained = self.kb.get("fitted") is not None
        return [self.result(env.sender, cid, "REPORT", rows=tuple(rows), trained=trained, origin=self.id)]

    # Rows --------------------------------

    def result_rows(
        self,
        cid: str,
        measurements: Iterable[Measurement],
        dataset_name: str,
        dataset_holon: HolonId,
        phase: str,
    ) -> List[ResultRow]:
        params = self.state.capability.canonical()
        return [
            ResultRow(
                query_id=cid,
                algorithm_id=self.state.super,
                algorithm_name=self.state.name,
                algorithm_params=params,
                model_id=self.id,
                dataset_name=dataset_name,
                dataset_holon=dataset_holon,
                measure=m.measure,
                value=m.value,
                elapsed=m.elapsed,
                phase=phase,
                label=self.ctx.labels.get((self.state.name, params)),
            )
            for m in measurements
        ]

    def _error_row(self, cid: str, dataset_name: str, dataset_holon: HolonId, phase: str, error: str) -> ResultRow:
        params = self.state.capability.canonical()
        return ResultRow(
            query_id=cid,
            algorithm_id=self.state.super,
            algorithm_name=self.state.name,
            algorithm_params=params,
            model_id=self.id,
            dataset_name=dataset_name,
            dataset_holon=dataset_holon,
            measure="-",
            phase=phase,
            label=self.ctx.labels.get((self.state.name, params)),
            error=error,
        )
