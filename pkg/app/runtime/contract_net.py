"""
contract_net.py

Continuation state for one call-for-proposal round.

A round never waits: the owning holon feeds it PROPOSE replies (or timeouts) as
they arrive and sends whatever CFPs the round asks for next. Children are asked
in ascending id order; with a stop rule the round asks one child at a time and
ends at the first proposal the rule accepts.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

from app.holarchy.state import HolonId, holon_order

MIN_RATIO = 0.0


@dataclass(frozen=True)
class Proposal:
    holon: HolonId
    value: float
    holds: bool = False
    timed_out: bool = False


ProposalRule = Callable[[Proposal], bool]


class CfpRound:
    def __init__(
        self,
        children: Sequence[HolonId],
        eligible: ProposalRule,
        stop_when: Optional[ProposalRule] = None,
    ) -> None:
        self.children: List[HolonId] = sorted(children, key=holon_order)
        self.eligible = eligible
        self.stop_when = stop_when
        self._next = 0
        self._awaiting: Set[HolonId] = set()
        self._proposals: Dict[HolonId, Proposal] = {}
        self.stopped_early = False

    @property
    def done(self) -> bool:
        return not self._awaiting and (self.stopped_early or self._next >= len(self.children))

    def start(self) -> List[HolonId]:
        """Children to send a CFP to now."""
        return self._issue()

    def on_propose(self, proposal: Proposal) -> List[HolonId]:
        if proposal.holon not in self._awaiting:
            return []
        self._awaiting.discard(proposal.holon)
        self._proposals[proposal.holon] = proposal
        if self.stop_when is not None and self.stop_when(proposal):
            self.stopped_early = True
            return []
        return self._issue()

    def on_timeout(self, holon: HolonId) -> List[HolonId]:
        return self.on_propose(Proposal(holon, MIN_RATIO, timed_out=True))

    def _issue(self) -> List[HolonId]:
        if self.stopped_early or self._next >= len(self.children):
            return []
        if self.stop_when is None:
            batch = self.children[self._next:]
            self._next = len(self.children)
        else:
            if self._awaiting:
                return []
            batch = [self.children[self._next]]
            self._next += 1
        self._awaiting.update(batch)
        return batch

    def results(self) -> List[Tuple[HolonId, float]]:
        return [
            (holon, self._proposals[holon].value)
            for holon in self.children
            if holon in self._proposals
        ]

    def winner(self) -> Optional[Proposal]:
        """Eligible proposal: holders first, then the highest ratio, then the lowest id."""
        best: Optional[Proposal] = None
        for holon in self.children:
            proposal = self._proposals.get(holon)
            if proposal is None or not self.eligible(proposal):
                continue
            if best is None or (proposal.holds, proposal.value) > (best.holds, best.value):
                best = proposal
        return best
