"""
inspect.py

Read-only views of a quiesced holarchy.

Responsibilities:
- validate_holarchy: check levels, super links, composite capabilities, skills and member digests
- export_dot: deterministic Graphviz text (`id:name` labels, dashed model links)
- snapshot: JSON-ready dump of every holon
- address_chain: the hops a second pass would take for a query
"""

import logging
from dataclasses import dataclass, field
from functools import reduce
from typing import Any, Dict, List, Mapping, Optional, Set

from app.algebra.operators import psum
from app.algebra.params import AlgebraError
from app.holarchy.base import HolonBase
from app.holarchy.state import (
    EntityKind,
    HolonKind,
    HolonState,
    SkillEntry,
    StructuralError,
    holon_order,
)

logger = logging.getLogger(__name__)

Holons = Mapping[str, HolonBase]


@dataclass
class ValidationReport:
    violations: List[str] = field(default_factory=list)
    checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, state: HolonState, message: str) -> None:
        self.violations.append(f"{state.label}: {message}")

    def __str__(self) -> str:
        if self.ok:
            return f"holarchy consistent ({self.checked} holons)"
        return "\n".join([f"{len(self.violations)} violation(s):"] + [f"  - {v}" for v in self.violations])


def _states(holons: Holons) -> Dict[str, HolonState]:
    return {holon_id: holon.state for holon_id, holon in holons.items()}


def validate_holarchy(holons: Holons) -> ValidationReport:
    """Check the structural laws on a quiesced holarchy; never raises."""
    states = _states(holons)
    report = ValidationReport(checked=len(states))

    for state in sorted(states.values(), key=lambda s: holon_order(s.id)):
        if state.kind is HolonKind.SYS:
            if state.level != 0 or state.supers:
                report.add(state, "SYS must sit at level 0 without supers")
            continue
        if state.kind is HolonKind.MODEL:
            _check_model(state, states, report)
            continue
        _check_tree_holon(state, states, report)

    if report.ok:
        logger.debug("[INSPECT] %s", report)
    else:
        logger.warning("[INSPECT] %d violation(s)", len(report.violations))
    return report


def _check_tree_holon(state: HolonState, states: Dict[str, HolonState], report: ValidationReport) -> None:
    if len(state.supers) != 1:
        report.add(state, f"expected exactly one super, found {state.supers}")
        return
    parent = states.get(state.super)
    if parent is None:
        report.add(state, f"super {state.super} is not registered")
        return
    if state.id not in parent.subs:
        report.add(state, f"super {parent.label} does not list it as a sub")
    if parent.level is None or state.level != parent.level + 1:
        report.add(state, f"level {state.level} does not follow super level {parent.level}")

    tree = [states[s] for s in state.tree_subs() if s in states]
    models = [states[s] for s in state.model_subs if s in states]
    missing = [s for s in state.subs if s not in states]
    if missing:
        report.add(state, f"unregistered subs {missing}")

    if state.kind is HolonKind.ABSTRACT:
        expected_skills = _union_skills(tree)
    elif tree:
        # composite: C is the sum of its tree subs, S and members their union
        try:
            expected = reduce(psum, (sub.capability for sub in tree))
        except AlgebraError as e:
            report.add(state, f"subs are not congruent: {e}")
        else:
            if expected != state.capability:
                report.add(state, f"capability {state.capability} != sum of subs {expected}")
        expected_skills = _union_skills(tree)
    else:
        companion = EntityKind.DATA if state.kind is HolonKind.ALGORITHM else EntityKind.ALGORITHM
        expected_skills = {s for m in models for s in m.skills if s.entity_kind is companion}

    if state.skills != expected_skills:
        report.add(state, f"skills {_fmt(state.skills)} != expected {_fmt(expected_skills)}")

    if tree:
        members: Set[str] = set().union(*(sub.members for sub in tree))
        if state.members != members:
            report.add(state, f"member digest differs from subs by {sorted(state.members ^ members)}")


def _check_model(state: HolonState, states: Dict[str, HolonState], report: ValidationReport) -> None:
    if not state.supers:
        report.add(state, "model without an algorithm holon")
        return
    algorithm = states.get(state.supers[0])
    if algorithm is None or algorithm.kind is not HolonKind.ALGORITHM:
        report.add(state, f"first super {state.supers[0]} is not an algorithm holon")
        return
    if algorithm.level is None or state.level != algorithm.level + 1:
        report.add(state, f"level {state.level} does not follow algorithm level {algorithm.level}")
    if len(state.supers) == 1:
        # spawned, never joined its data holon
        if state.skills:
            report.add(state, "unjoined model carries skills")
        return
    if len(state.supers) != 2:
        report.add(state, f"expected two supers, found {state.supers}")
        return
    data = states.get(state.supers[1])
    if data is None or data.kind is not HolonKind.DATA:
        report.add(state, f"second super {state.supers[1]} is not a data holon")
        return
    if state.id not in data.model_subs:
        report.add(state, f"data holon {data.label} does not list it")
    if state.skills:
        expected = {
            SkillEntry(EntityKind.ALGORITHM, algorithm.name, algorithm.capability),
            SkillEntry(EntityKind.DATA, data.name, data.capability),
        }
        if state.skills != expected:
            report.add(state, f"skills {_fmt(state.skills)} are not the capabilities of its supers")


def _union_skills(states: List[HolonState]) -> Set[SkillEntry]:
    return set().union(*(s.skills for s in states)) if states else set()


def _fmt(skills: Set[SkillEntry]) -> List[str]:
    return sorted(str(s) for s in skills)


# Export --------------------------------


def _label(state: HolonState) -> str:
    return state.id if state.name == state.id else f"{state.id}:{state.name}"


def export_dot(holons: Holons, include_models: bool = True) -> str:
    """Graphviz text; identical holarchies give identical text."""
    states = _states(holons)
    shown = [
        s for s in sorted(states.values(), key=lambda s: holon_order(s.id))
        if include_models or s.kind is not HolonKind.MODEL
    ]
    lines = ["digraph holarchy {", "  node [shape=ellipse];"]
    for state in shown:
        shape = ' shape=box' if state.kind is HolonKind.MODEL else ""
        lines.append(f'  "{state.id}" [label="{_label(state)}"{shape}];')
    for state in shown:
        for sub in state.tree_subs():
            lines.append(f'  "{state.id}" -> "{sub}";')
        if include_models:
            for model in sorted(state.model_subs, key=holon_order):
                lines.append(f'  "{state.id}" -> "{model}" [style=dashed];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def snapshot(holons: Holons) -> Dict[str, Any]:
    states = _states(holons)
    out: Dict[str, Any] = {}
    for state in sorted(states.values(), key=lambda s: holon_order(s.id)):
        out[state.id] = {
            "kind": state.kind.value,
            "name": state.name,
            "level": state.level,
            "capability": state.capability.to_json(),
            "skills": _fmt(state.skills),
            "supers": list(state.supers),
            "subs": sorted(state.subs, key=holon_order),
            "models": sorted(state.model_subs, key=holon_order),
            "members": sorted(state.members),
            "address_book": dict(sorted(state.address_book.items())),
            "type_chain": list(state.type_chain),
        }
    return out


def address_chain(holons: Holons, start: str, query_id: str) -> List[str]:
    """Holons visited when following `query_id` address entries from `start`; ends where an entry points home."""
    states = _states(holons)
    chain = [start]
    current = states.get(start)
    while current is not None:
        hop = current.address_book.get(query_id)
        if hop is None or hop == current.id:
            break
        if hop in chain:
            raise StructuralError(f"address loop for {query_id} at {hop}")
        chain.append(hop)
        current = states.get(hop)
    return chain


def holon_count(holons: Holons, kind: Optional[HolonKind] = None) -> int:
    return sum(1 for holon in holons.values() if kind is None or holon.state.kind is kind)

