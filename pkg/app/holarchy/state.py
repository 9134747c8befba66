"""
state.py

Holon identity and bookkeeping: the five holon kinds, skills, resource specs and
the per-holon state (links, capability, skills, address book).

A HolonState is owned by exactly one holon; other holons only learn about it
through messages.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Set, Tuple

from app.algebra.params import EMPTY, ParamSet

HolonId = str

SYS_ID: HolonId = "SYS"
ALG_ID: HolonId = "ALG"
DATA_ID: HolonId = "DATA"


class StructuralError(Exception):
    """Raised when a link, level or capability would break the holarchy invariants."""


class AddressError(Exception):
    """Raised when a holon is asked for a next hop it never stored."""


class HolonKind(str, Enum):
    SYS = "sys"
    ABSTRACT = "abstract"
    ALGORITHM = "algorithm"
    DATA = "data"
    MODEL = "model"


class EntityKind(str, Enum):
    ALGORITHM = "algorithm"
    DATA = "data"
    MODEL = "model"


ENTITY_HOLON_KIND = {
    EntityKind.ALGORITHM: HolonKind.ALGORITHM,
    EntityKind.DATA: HolonKind.DATA,
    EntityKind.MODEL: HolonKind.MODEL,
}


def holon_order(holon_id: HolonId) -> Tuple[int, int, str]:
    """Sort key: numeric ids ascending, then named bootstrap holons."""
    if holon_id.isdigit():
        return (0, int(holon_id), "")
    return (1, 0, holon_id)


@dataclass(frozen=True)
class SkillEntry:
    entity_kind: EntityKind
    entity_name: str
    params: ParamSet = EMPTY

    def __str__(self) -> str:
        return f"{self.entity_kind.value}:{self.entity_name}{self.params}"


@dataclass(frozen=True)
class ResourceSpec:
    entity_kind: EntityKind
    name: str
    params: ParamSet = EMPTY
    type_chain: Tuple[str, ...] = ()
    defaults: ParamSet = EMPTY

    def __post_init__(self) -> None:
        if not self.name or not self.name.strip():
            raise StructuralError("resource name must be non-empty")

    @property
    def key(self) -> str:
        return f"{self.name}{self.params}"

    def __str__(self) -> str:
        return f"{self.entity_kind.value} {self.name}{self.params}"


@dataclass
class HolonState:
    id: HolonId
    kind: HolonKind
    name: str
    level: Optional[int] = None
    capability: ParamSet = EMPTY
    skills: Set[SkillEntry] = field(default_factory=set)
    supers: List[HolonId] = field(default_factory=list)
    subs: Set[HolonId] = field(default_factory=set)
    model_subs: Set[HolonId] = field(default_factory=set)
    address_book: Dict[str, HolonId] = field(default_factory=dict)
    model_links: Optional[Tuple[HolonId, HolonId]] = None
    type_chain: Tuple[str, ...] = ()
    # canonical keys of the leaf capabilities below (Algorithm/Data holons)
    members: Set[str] = field(default_factory=set)
    # former subs that now live under a freshly inserted intermediate
    moved: Dict[HolonId, HolonId] = field(default_factory=dict)

    @property
    def label(self) -> str:
        return f"{self.id}:{self.name}"

    @property
    def super(self) -> Optional[HolonId]:
        return self.supers[0] if self.supers else None

    def tree_subs(self) -> List[HolonId]:
        """Non-model subs in CFP order."""
        return sorted(self.subs - self.model_subs, key=holon_order)

    def is_atomic(self) -> bool:
        return self.kind in (HolonKind.ALGORITHM, HolonKind.DATA) and not (
            self.subs - self.model_subs
        )

    # Address book --------------------------------

    def store_address(self, query_id: str, target: HolonId) -> None:
        self.address_book[query_id] = target

    def get_address(self, query_id: str) -> HolonId:
        try:
            return self.address_book[query_id]
        except KeyError as e:
            raise AddressError(f"{self.label} holds no address for query '{query_id}'") from e

    def rewire_addresses_on_insert(self, new_intermediate: HolonId, moved_leaf: HolonId) -> Dict[str, HolonId]:
        """
        Repoint entries aimed at `moved_leaf` to `new_intermediate`.

        Returns the entries the intermediate must hold (query id -> moved leaf).
        """
        carried = {q: t for q, t in self.address_book.items() if t == moved_leaf}
        for query_id in carried:
            self.address_book[query_id] = new_intermediate
        return carried
