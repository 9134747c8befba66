"""
layouts.py

Pre-built algorithm-side shapes for message-count checks.

The holons are attached directly (no messages), with capabilities and member
digests set the way inserts would have left them. Each layout comes with a
sample spec: a new member of the family whose insert descends the whole tree.
"""

import itertools
import logging
from dataclasses import dataclass
from functools import reduce
from typing import Dict, List, Sequence, Tuple

from app.algebra.operators import psum
from app.algebra.params import STAR, ParamSet
from app.holarchy.base import HolonBase
from app.holarchy.state import EntityKind, HolonKind, ResourceSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Layout:
    shape: str
    leaves: int
    branching: int
    depth: int
    sample: ResourceSpec


def _spec(family: str, values: Dict[str, str]) -> ResourceSpec:
    return ResourceSpec(EntityKind.ALGORITHM, family, ParamSet.of(values))


def _attach(parent: HolonBase, family: str, capability: ParamSet, members) -> HolonBase:
    return parent.create_holon(
        family,
        HolonKind.ALGORITHM,
        capability=capability,
        members=members,
        kb={"models_by_dataset": {}},
    )


def levels_needed(branching: int, leaves: int) -> int:
    """Smallest h with branching**h >= leaves (at least 1)."""
    depth, span = 1, branching
    while span < leaves:
        depth += 1
        span *= branching
    return depth


def complete_layout(root: HolonBase, branching: int, leaves: int, family: str = "F") -> Layout:
    """
    A b-ary tree over the first `leaves` digit strings of length ceil(log_b n).

    Leaf parameters are the digits (d1..dh); each composite fixes the common prefix
    of its leaves and holds * elsewhere.
    """
    if branching < 2 or leaves < 2:
        raise ValueError("complete layouts need branching >= 2 and at least two leaves")
    depth = levels_needed(branching, leaves)
    digits = list(itertools.islice(itertools.product(range(branching), repeat=depth), leaves))
    specs = {t: _spec(family, {f"d{j + 1}": f"v{d}" for j, d in enumerate(t)}) for t in digits}

    def grow(parent: HolonBase, group: Sequence[Tuple[int, ...]], position: int) -> None:
        if len(group) == 1:
            spec = specs[group[0]]
            _attach(parent, family, spec.params, {spec.key})
            return
        while len({t[position] for t in group}) == 1:
            position += 1
        node = _attach(
            parent,
            family,
            reduce(psum, (specs[t].params for t in group)),
            {specs[t].key for t in group},
        )
        children = [list(g) for _, g in itertools.groupby(group, key=lambda t: t[position])]
        for child in children:
            grow(node, child, position + 1)

    grow(root, digits, 0)
    root.state.members |= {spec.key for spec in specs.values()}

    last = digits[-1]
    sample = _spec(family, {**{f"d{j + 1}": f"v{d}" for j, d in enumerate(last[:-1])}, f"d{depth}": "sample"})
    logger.info("[LAYOUT] complete b=%d n=%d depth=%d", branching, leaves, depth)
    return Layout("complete", leaves, branching, depth, sample)


def deep_layout(root: HolonBase, leaves: int, family: str = "F") -> Layout:
    """
    A chain: composite k holds leaf k and composite k+1, the last composite
    holds the last two leaves.

    Leaf k reads q_j = a before k, b at k and c after k; composite k fixes a
    before k and holds * from k on. Composites get the lower ids so the chain
    child is always asked first.
    """
    if leaves < 2:
        raise ValueError("deep layouts need at least two leaves")
    names = [f"q{j:03d}" for j in range(1, leaves + 1)]

    def leaf(k: int) -> ResourceSpec:
        return _spec(family, {n: ("a" if j < k else "b" if j == k else "c") for j, n in enumerate(names, start=1)})

    specs = [leaf(k) for k in range(1, leaves + 1)]
    keys = [spec.key for spec in specs]

    chain: List[HolonBase] = []
    parent = root
    for k in range(1, leaves):
        capability = ParamSet.of({n: ("a" if j < k else STAR) for j, n in enumerate(names, start=1)})
        parent = _attach(parent, family, capability, set(keys[k - 1:]))
        chain.append(parent)
    for k, composite in enumerate(chain, start=1):
        _attach(composite, family, specs[k - 1].params, {keys[k - 1]})
    _attach(chain[-1], family, specs[-1].params, {keys[-1]})
    root.state.members |= set(keys)

    sample = _spec(family, {n: "a" for n in names})
    logger.info("[LAYOUT] deep n=%d", leaves)
    return Layout("deep", leaves, 1, leaves, sample)
