"""
construction.py

Holarchy growth.

Responsibilities:
- Name routing at the ALG / DATA roots
- Similarity-guided descent through composites, with a leaf created where no
  sub beats the composite's own ratio
- Intermediate creation when an atomic holon is asked to take a different spec
- Joining and upward capability / member propagation

Every step is a message handler; a descent in progress is a CfpRound stored
under the query id.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Deque, Dict, FrozenSet, List, Optional, Tuple

from app.algebra.operators import name_similarity, psum, similarity
from app.algebra.params import AlgebraError, ParamPair, ParamSet
from app.holarchy.base import LEGAL_CHILDREN, HolonBase, handles
from app.holarchy.queries import InsertMode, InsertRequest
from app.holarchy.state import (
    ENTITY_HOLON_KIND,
    SYS_ID,
    EntityKind,
    HolonId,
    HolonKind,
    StructuralError,
)
from app.runtime.contract_net import MIN_RATIO, CfpRound, Proposal
from app.runtime.messages import Envelope, Performative
from app.runtime.scheduler import DeliveryError

logger = logging.getLogger(__name__)

SIMILARITY = "SIMILARITY"


@dataclass
class InsertRound:
    request: InsertRequest
    verb: str
    cfp: CfpRound
    criterion: Dict[str, Any] = field(default_factory=dict)
    own: Optional[float] = None


@dataclass
class FamilyQueue:
    """Inserts of one family at a root: the one in flight and those behind it."""

    active: str
    waiting: Deque[Tuple[InsertRequest, str]] = field(default_factory=deque)


class ConstructionMixin(HolonBase):
    # Entry --------------------------------

    @handles(Performative.ASK, "ADD", "TRAIN FIRST PASS")
    def on_insert(self, env: Envelope) -> List[Envelope]:
        request: InsertRequest = env.payload["request"]
        if self.state.kind is HolonKind.ABSTRACT:
            return self.admit(request, env.verb)
        return self.add_resource(request, env.verb)

    def admit(self, request: InsertRequest, verb: str) -> List[Envelope]:
        """One insert per family name descends at a time; the rest wait at the root."""
        family = request.spec.name
        queue = self.families.get(family)
        if queue is not None:
            queue.waiting.append((request, verb))
            logger.info("%s %s waits behind %s for %s", self.tag, request.query_id, queue.active, family)
            return []
        self.families[family] = FamilyQueue(request.query_id)
        return self.initiate_add(request, verb)

    def settle_family(self, cid: str) -> List[Envelope]:
        """The insert `cid` is done below this root: start the next one of its family."""
        family = next((name for name, queue in self.families.items() if queue.active == cid), None)
        if family is None:
            return []
        queue = self.families[family]
        if not queue.waiting:
            del self.families[family]
            return []
        request, verb = queue.waiting.popleft()
        queue.active = request.query_id
        logger.info("%s %s settled, %s goes next", self.tag, cid, request.query_id)
        try:
            return self.initiate_add(request, verb)
        except (StructuralError, AlgebraError) as e:
            return self.report_failure(request.query_id, f"{self.state.label} failed on {verb}: {e}")

    def settle_upward(self, cid: str) -> List[Envelope]:
        level = self.state.level
        if level is None:
            return []
        if level <= 1:
            return self.settle_family(cid)
        if self.state.super is None:
            return []
        return [self.inform(self.state.super, cid, "SETTLED", origin=self.id)]

    @handles(Performative.INFORM, "SETTLED")
    def on_settled(self, env: Envelope) -> List[Envelope]:
        return self.settle_upward(env.conversation_id)

    def report_failure(self, conversation_id: str, message: str) -> List[Envelope]:
        # a failed insert still frees its family at the root
        return super().report_failure(conversation_id, message) + self.settle_upward(conversation_id)

    def initiate_add(self, request: InsertRequest, verb: str) -> List[Envelope]:
        """Root step: find the sub that carries the spec's name, or start a new family."""
        children = self.state.tree_subs()
        if not children:
            return self.create_leaf(request)

        def exact(p: Proposal) -> bool:
            return p.value >= 1.0

        cfp = CfpRound(children, eligible=exact, stop_when=None if self.ctx.strict_cfp else exact)
        criterion = {"criterion": "name", "name": request.spec.name}
        logger.info("%s name routing %s over %d subs", self.tag, request.spec.name, len(children))
        return self._open_round(InsertRound(request, verb, cfp, criterion))

    def add_resource(self, request: InsertRequest, verb: str) -> List[Envelope]:
        spec = request.spec
        try:
            own = similarity(spec.params, self.state.capability, self.ctx.similarity)
        except AlgebraError as e:
            raise StructuralError(f"{spec} does not fit the schema of {self.state.label}: {e}") from e

        if self.state.is_atomic():
            if own == 1.0:
                logger.info("%s already holds %s", self.tag, spec)
                return self.on_existing(request)
            missing = self._missing_resource(request)
            if missing:
                return missing
            logger.info("%s similarity %.4f for %s, asking %s for a new super", self.tag, own, spec, self.state.super)
            return [
                self.ask(
                    self.state.super,
                    request.query_id,
                    "CREATE-HOLON",
                    origin=self.id,
                    name=self.state.name,
                    kind=self.state.kind,
                    capability=self.state.capability,
                    skills=frozenset(self.state.skills),
                    members=frozenset(self.state.members),
                    request=request,
                )
            ]

        holds = spec.key in self.state.members

        def eligible(p: Proposal) -> bool:
            return p.holds or p.value > own

        if self.ctx.strict_cfp:
            stop = None
        elif holds:
            stop = lambda p: p.holds  # noqa: E731
        else:
            stop = lambda p: p.value > own  # noqa: E731

        cfp = CfpRound(self.state.tree_subs(), eligible, stop)
        criterion = {"criterion": "capability", "params": spec.params, "key": spec.key}
        logger.debug("%s own similarity %.4f for %s", self.tag, own, spec)
        return self._open_round(InsertRound(request, verb, cfp, criterion, own))

    # Contract net --------------------------------

    def _open_round(self, pending: InsertRound) -> List[Envelope]:
        cid = pending.request.query_id
        self.rounds[cid] = pending
        return self._advance(cid, pending, pending.cfp.start())

    def _advance(self, cid: str, pending: InsertRound, children: List[HolonId]) -> List[Envelope]:
        if children:
            return [
                self.envelope(child, Performative.CFP, cid, SIMILARITY, **pending.criterion)
                for child in children
            ]
        if not pending.cfp.done:
            return []
        self.rounds.pop(cid, None)
        return self._conclude(pending)

    def _conclude(self, pending: InsertRound) -> List[Envelope]:
        winner = pending.cfp.winner()
        request = pending.request
        if winner is None:
            return self.create_leaf(request)
        logger.info("%s routing %s to %s (%.4f)", self.tag, request.spec, winner.holon, winner.value)
        return [self.ask(winner.holon, request.query_id, pending.verb, request=request)]

    @handles(Performative.CFP, SIMILARITY)
    def on_cfp(self, env: Envelope) -> List[Envelope]:
        criterion = env.payload
        holds = False
        if criterion["criterion"] == "name":
            value = name_similarity(
                ParamPair("name", self.state.name), ParamPair("name", criterion["name"]), self.ctx.similarity
            )
        else:
            try:
                value = similarity(criterion["params"], self.state.capability, self.ctx.similarity)
            except AlgebraError:
                value = MIN_RATIO
            holds = criterion["key"] in self.state.members
        return [self.envelope(env.sender, Performative.PROPOSE, env.conversation_id, SIMILARITY, value=value, holds=holds)]

    @handles(Performative.PROPOSE, SIMILARITY)
    def on_proposal(self, env: Envelope) -> List[Envelope]:
        pending = self.rounds.get(env.conversation_id)
        if pending is None:
            logger.debug("%s late proposal from %s ignored", self.tag, env.sender)
            return []
        proposal = Proposal(env.sender, env.payload["value"], env.payload.get("holds", False))
        return self._advance(env.conversation_id, pending, pending.cfp.on_propose(proposal))

    @handles(Performative.INFORM, "TIMEOUT")
    def on_timeout(self, env: Envelope) -> List[Envelope]:
        pending = self.rounds.get(env.conversation_id)
        if pending is None:
            return []
        logger.warning("%s %s did not propose in time", self.tag, env.sender)
        return self._advance(env.conversation_id, pending, pending.cfp.on_timeout(env.sender))

    def on_delivery_error(self, env: Envelope, error: DeliveryError) -> List[Envelope]:
        pending = self.rounds.get(env.conversation_id)
        if env.performative is Performative.CFP and pending is not None:
            return self._advance(env.conversation_id, pending, pending.cfp.on_timeout(env.to))
        return super().on_delivery_error(env, error)

    # Leaves --------------------------------

    def _missing_resource(self, request: InsertRequest) -> List[Envelope]:
        if request.spec.entity_kind is EntityKind.DATA and request.resource is None:
            return self.report_failure(
                request.query_id,
                f"missing resource info: dataset {request.spec.name}{request.spec.params} is not in the "
                "holarchy and no data was provided; add it first (add-data) or load it with the query",
            )
        return []

    def leaf_kb(self, request: InsertRequest) -> Dict[str, Any]:
        if request.spec.entity_kind is EntityKind.DATA:
            return {"dataset": request.resource, "deny_access": False, "grants": {}, "parked": {}}
        return {"models_by_dataset": {}}

    def create_leaf(self, request: InsertRequest) -> List[Envelope]:
        """Create the spec's holon directly below this one."""
        missing = self._missing_resource(request)
        if missing:
            return missing
        spec = request.spec
        leaf = self.create_holon(
            spec.name,
            ENTITY_HOLON_KIND[spec.entity_kind],
            capability=spec.params,
            members={spec.key},
            kb=self.leaf_kb(request),
            type_chain=spec.type_chain,
        )
        out = self.after_leaf(leaf.id, request)
        return out + self.update_capability(spec.params, frozenset({spec.key}), request.query_id, settle=True)

    def after_leaf(self, leaf: HolonId, request: InsertRequest) -> List[Envelope]:
        cid = request.query_id
        if request.mode is InsertMode.ADD_ONLY:
            return [self.inform(SYS_ID, cid, "INSERTED", holon=leaf, existing=False)]
        verb = "SPAWN" if request.spec.entity_kind is EntityKind.ALGORITHM else "REGISTER"
        return [self.ask(leaf, cid, verb, request=request)]

    def on_existing(self, request: InsertRequest) -> List[Envelope]:
        if request.mode is InsertMode.ADD_ONLY:
            out = [self.inform(SYS_ID, request.query_id, "INSERTED", holon=self.id, existing=True)]
        elif request.spec.entity_kind is EntityKind.ALGORITHM:
            out = self.spawn_model(request)
        else:
            out = self.register_destination(request)
        return out + self.settle_upward(request.query_id)

    # Intermediates --------------------------------

    @handles(Performative.ASK, "CREATE-HOLON")
    def on_create_holon(self, env: Envelope) -> List[Envelope]:
        payload = env.payload
        moved_leaf = payload["origin"]
        if moved_leaf not in self.state.subs:
            forward = self.rerouted(env, moved_leaf)
            if forward is not None:
                return [forward]
            raise StructuralError(f"{moved_leaf} asked {self.state.label} for a super but is not its sub")

        intermediate = self.create_intermediate(
            moved_leaf,
            payload["name"],
            payload["kind"],
            payload["capability"],
            payload["skills"],
            payload["members"],
        )
        return [
            self.inform(
                moved_leaf,
                env.conversation_id,
                "NEW-SUPER",
                super=intermediate.id,
                level=intermediate.state.level,
                kind=intermediate.state.kind,
                request=payload["request"],
            )
        ]

    def create_intermediate(
        self,
        moved_leaf: HolonId,
        name: str,
        kind: HolonKind,
        capability: ParamSet,
        skills: FrozenSet,
        members: FrozenSet[str],
    ) -> HolonBase:
        """Put a new composite between this holon and `moved_leaf`, seeded with the leaf's C and S."""
        intermediate = self.create_holon(name, kind, capability=capability, skills=skills, members=members)
        intermediate.state.subs.add(moved_leaf)
        self.state.subs.discard(moved_leaf)
        self.state.moved[moved_leaf] = intermediate.id
        carried = self.state.rewire_addresses_on_insert(intermediate.id, moved_leaf)
        intermediate.state.address_book.update(carried)
        if carried:
            logger.info("%s rewired %s through %s", self.tag, sorted(carried), intermediate.id)
        return intermediate

    @handles(Performative.INFORM, "NEW-SUPER")
    def on_new_super(self, env: Envelope) -> List[Envelope]:
        payload = env.payload
        new_super, super_level = payload["super"], payload["level"]
        request: InsertRequest = payload["request"]
        cid = env.conversation_id
        out: List[Envelope] = []

        # a shallower super can arrive late when two inserts split this leaf
        if super_level + 1 > (self.state.level or 0):
            former = self.state.super
            self.state.supers = [new_super]
            self.state.level = super_level + 1
            if former is not None and former != new_super:
                out.append(self.inform(former, cid, "DETACHED", origin=self.id))
            out.extend(self.level_updates(cid))
            logger.info("%s joined %s at level %d", self.tag, new_super, self.state.level)

        spec = request.spec
        leaf = self.create_holon(
            spec.name,
            ENTITY_HOLON_KIND[spec.entity_kind],
            capability=spec.params,
            attach=False,
            members={spec.key},
            kb=self.leaf_kb(request),
            type_chain=spec.type_chain,
        )
        out.append(self.ask(leaf.id, cid, "JOIN", super=new_super, level=super_level, kind=payload["kind"]))
        out.extend(self.after_leaf(leaf.id, request))
        return out

    @handles(Performative.INFORM, "DETACHED")
    def on_detached(self, env: Envelope) -> List[Envelope]:
        # everything the moved sub sent here earlier is already handled or forwarded
        target = self.state.moved.pop(env.payload["origin"], None)
        if target is not None:
            logger.debug("%s dropped forwarding of %s to %s", self.tag, env.payload["origin"], target)
        return []

    # Joining --------------------------------

    @handles(Performative.INFORM, "LEVEL")
    def on_level(self, env: Envelope) -> List[Envelope]:
        self.state.level = env.payload["level"]
        return self.level_updates(env.conversation_id)

    @handles(Performative.ASK, "JOIN")
    def on_join(self, env: Envelope) -> List[Envelope]:
        payload = env.payload
        return self.join_holon(payload["super"], payload["level"], payload["kind"], env.conversation_id)

    def join_holon(self, new_super: HolonId, super_level: int, super_kind: HolonKind, cid: str) -> List[Envelope]:
        if new_super == self.id or new_super in self.state.subs:
            raise StructuralError(f"{self.state.label} cannot join its own descendant {new_super}")
        if self.state.kind not in LEGAL_CHILDREN.get(super_kind, ()):
            raise StructuralError(f"{self.state.kind.value} holon cannot join a {super_kind.value} holon")
        self.state.supers = [new_super]
        self.state.level = super_level + 1
        # the join is the last step of the insert that created this holon
        return [
            self.inform(
                new_super,
                cid,
                "CAPABILITY",
                capability=self.state.capability,
                members=frozenset(self.state.members),
                joining=True,
                settle=True,
                origin=self.id,
            )
        ]

    @handles(Performative.INFORM, "CAPABILITY")
    def on_capability(self, env: Envelope) -> List[Envelope]:
        payload = env.payload
        origin = payload["origin"]
        forward = self.rerouted(env, origin)
        if forward is not None:
            return [forward]
        if payload.get("joining"):
            self.state.subs.add(origin)
        return self.update_capability(
            payload["capability"], payload["members"], env.conversation_id, payload.get("settle", False)
        )

    def update_capability(
        self, incoming: ParamSet, members: FrozenSet[str], cid: str, settle: bool = False
    ) -> List[Envelope]:
        """Merge a sub's C and members; with `settle` the update also closes the insert `cid`."""
        changed = False
        fresh = set(members) - self.state.members
        if fresh:
            self.state.members |= fresh
            changed = True

        level = self.state.level or 0
        if level > 1:
            try:
                merged = psum(self.state.capability, incoming)
            except AlgebraError as e:
                raise StructuralError(f"schema violation at {self.state.label}: {e}") from e
            if merged != self.state.capability:
                logger.debug("%s capability %s -> %s", self.tag, self.state.capability, merged)
                self.state.capability = merged
                changed = True

        if level <= 1:
            return self.settle_family(cid) if settle else []
        if self.state.super is None:
            return []
        if not changed:
            return self.settle_upward(cid) if settle else []
        return [
            self.inform(
                self.state.super,
                cid,
                "CAPABILITY",
                capability=self.state.capability,
                members=frozenset(self.state.members),
                joining=False,
                settle=settle,
                origin=self.id,
            )
        ]
