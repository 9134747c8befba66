"""
base.py

Shared plumbing for holon agents.

Responsibilities:
- Hold the services every holon reads (runtime, learner registry, similarity factors)
- Route each envelope to the handler registered for its (performative, verb)
- Build outbound envelopes and report handler failures to SYS
- Create holons under the legal-parent table
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Set, Tuple

from app.algebra.operators import DEFAULT_SIMILARITY, SimilarityConfig
from app.algebra.params import EMPTY, ParamSet
from app.holarchy.state import (
    SYS_ID,
    HolonId,
    HolonKind,
    HolonState,
    SkillEntry,
    StructuralError,
    holon_order,
)
from app.ml.registry import LearnerRegistry
from app.runtime.messages import Envelope, Performative
from app.runtime.scheduler import DeliveryError, Runtime

logger = logging.getLogger(__name__)

LEGAL_CHILDREN: Dict[HolonKind, Tuple[HolonKind, ...]] = {
    HolonKind.SYS: (HolonKind.ABSTRACT,),
    HolonKind.ABSTRACT: (HolonKind.ALGORITHM, HolonKind.DATA),
    HolonKind.ALGORITHM: (HolonKind.ALGORITHM, HolonKind.MODEL),
    HolonKind.DATA: (HolonKind.DATA,),
}


@dataclass
class HolarchyContext:
    runtime: Runtime
    registry: LearnerRegistry
    similarity: SimilarityConfig = DEFAULT_SIMILARITY
    strict_cfp: bool = False
    strict_skill_match: bool = False
    seed: int = 0
    # (algorithm name, canonical params) -> display label such as A03
    labels: Dict[Tuple[str, str], str] = field(default_factory=dict)
    holon_factory: Optional[Callable[..., "HolonBase"]] = None

    @property
    def clock(self) -> Callable[[], float]:
        return self.runtime.clock


def handles(performative: Performative, *verbs: str):
    """Register the decorated method for every (performative, verb) given."""

    def decorate(fn):
        fn._handles = tuple((performative, verb) for verb in verbs)
        return fn

    return decorate


@dataclass
class FanOut:
    """Outstanding replies of one ASK fan-out."""

    asker: HolonId
    outstanding: Set[HolonId]
    items: List[Any] = field(default_factory=list)
    payload: Dict[str, Any] = field(default_factory=dict)


class HolonBase:
    _handlers: Dict[Tuple[Performative, str], str] = {}

    def __init_subclass__(cls, **kwargs) -> None:
        super().__init_subclass__(**kwargs)
        table: Dict[Tuple[Performative, str], str] = {}
        for klass in reversed(cls.__mro__):
            for attr, member in vars(klass).items():
                for key in getattr(member, "_handles", ()):
                    table[key] = attr
        cls._handlers = table

    def __init__(self, ctx: HolarchyContext, state: HolonState, kb: Optional[Dict[str, Any]] = None) -> None:
        self.ctx = ctx
        self.state = state
        self.kb: Dict[str, Any] = dict(kb or {})
        self.pending: Dict[Tuple[str, str], FanOut] = {}
        # open CFP rounds keyed by conversation id
        self.rounds: Dict[str, Any] = {}
        # inserts queued per family name, used by the roots
        self.families: Dict[str, Any] = {}

    @property
    def id(self) -> HolonId:
        return self.state.id

    @property
    def tag(self) -> str:
        return f"[HOLON {self.state.label}]"

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.state.label} L{self.state.level}>"

    # Dispatch --------------------------------

    def handle(self, env: Envelope) -> List[Envelope]:
        method = self._handlers.get((env.performative, env.verb))
        if method is None:
            logger.warning("%s no handler for %s %s from %s", self.tag, env.performative.value, env.verb, env.sender)
            return []
        try:
            return list(getattr(self, method)(env) or [])
        except Exception as e:
            logger.exception("%s failed handling %s %s", self.tag, env.performative.value, env.verb)
            return self.report_failure(env.conversation_id, f"{self.state.label} failed on {env.verb}: {e}")

    def on_delivery_error(self, env: Envelope, error: DeliveryError) -> List[Envelope]:
        return self.report_failure(env.conversation_id, str(error))

    def report_failure(self, conversation_id: str, message: str) -> List[Envelope]:
        return [self.inform(SYS_ID, conversation_id, "FAILED", error=message)]

    # Envelopes --------------------------------

    def envelope(self, to: HolonId, performative: Performative, cid: str, verb: str, **payload: Any) -> Envelope:
        return Envelope(self.id, to, performative, cid, verb, payload)

    def ask(self, to: HolonId, cid: str, verb: str, **payload: Any) -> Envelope:
        return self.envelope(to, Performative.ASK, cid, verb, **payload)

    def inform(self, to: HolonId, cid: str, verb: str, **payload: Any) -> Envelope:
        return self.envelope(to, Performative.INFORM, cid, verb, **payload)

    def result(self, to: HolonId, cid: str, verb: str, **payload: Any) -> Envelope:
        return self.envelope(to, Performative.RESULT, cid, verb, **payload)

    def forward(self, env: Envelope, to: HolonId) -> Envelope:
        """Pass `env` on unchanged except for the hop."""
        return Envelope(self.id, to, env.performative, env.conversation_id, env.verb, env.payload)

    def rerouted(self, env: Envelope, origin: HolonId) -> Optional[Envelope]:
        """Forward an upward message from a sub that now sits below a new intermediate."""
        target = self.state.moved.get(origin)
        if target is None or origin in self.state.subs:
            return None
        logger.debug("%s forwarding %s from %s to %s", self.tag, env.verb, origin, target)
        return self.forward(env, target)

    def level_updates(self, cid: str) -> List[Envelope]:
        """Push this holon's level down one step. Models follow their algorithm side only."""
        if self.state.level is None:
            return []
        if self.state.kind is HolonKind.DATA:
            subs = self.state.tree_subs()
        else:
            subs = sorted(self.state.subs, key=holon_order)
        return [self.inform(sub, cid, "LEVEL", level=self.state.level + 1) for sub in subs]

    # Creation --------------------------------

    def create_holon(
        self,
        name: str,
        kind: HolonKind,
        capability: ParamSet = EMPTY,
        skills: Iterable[SkillEntry] = (),
        attach: bool = True,
        members: Iterable[str] = (),
        kb: Optional[Dict[str, Any]] = None,
        type_chain: Tuple[str, ...] = (),
    ) -> "HolonBase":
        """Create a holon, either as a sub of this one or detached (joins later)."""
        if attach and kind not in LEGAL_CHILDREN.get(self.state.kind, ()):
            raise StructuralError(f"{self.state.kind.value} holon {self.state.label} cannot parent a {kind.value} holon")
        if self.ctx.holon_factory is None:
            raise StructuralError("holarchy context has no holon factory")

        state = HolonState(
            id=self.ctx.runtime.next_id(),
            kind=kind,
            name=name,
            level=self.state.level + 1 if attach else None,
            capability=capability,
            skills=set(skills),
            supers=[self.id] if attach else [],
            members=set(members),
            type_chain=type_chain,
        )
        holon = self.ctx.holon_factory(self.ctx, state, kb)
        self.ctx.runtime.register(holon)
        if attach:
            self.state.subs.add(state.id)
            if kind is HolonKind.MODEL:
                self.state.model_subs.add(state.id)
        logger.info(
            "%s created %s %s%s",
            self.tag,
            kind.value,
            state.label,
            f" at level {state.level}" if attach else " (detached)",
        )
        return holon
