"""
hops.py

Message-count checks against the routing cost bounds.

Responsibilities:
- Bounds: b*ceil(log_b n) + 3 CFPs per insert on complete layouts, n + 3 on deep chains
- Holon totals for fully trained holarchies
- hop_report: measured counts from the hop traces next to their bounds
- run_bound_suite: build layouts in fresh systems, insert one more member and measure
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Mapping, Optional, Sequence

from app.config import Settings
from app.holarchy.inspect import holon_count
from app.holarchy.layouts import Layout, complete_layout, deep_layout, levels_needed
from app.holarchy.queries import Criteria, OutputConfig, TestQuery, TrainingQuery
from app.holarchy.state import ALG_ID, HolonKind
from app.ml.catalogue import algorithm_entry
from app.runtime.messages import HopTrace, Performative
from app.system import HolarchySystem

logger = logging.getLogger(__name__)

SLACK = 3


@dataclass(frozen=True)
class BoundCheck:
    query_id: str
    label: str
    measured: int
    bound: int

    @property
    def passed(self) -> bool:
        return self.measured <= self.bound

    def __str__(self) -> str:
        verdict = "ok" if self.passed else "EXCEEDED"
        return f"{self.query_id:<16} {self.label:<34} {self.measured:>6} <= {self.bound:<6} {verdict}"


@dataclass
class HopReport:
    checks: List[BoundCheck] = field(default_factory=list)
    # conversation id -> total envelopes
    totals: Mapping[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(check.passed for check in self.checks)

    def render(self) -> str:
        lines = [str(check) for check in self.checks]
        failed = sum(1 for check in self.checks if not check.passed)
        lines.append(f"{len(self.checks)} check(s), {failed} exceeded")
        return "\n".join(lines) + "\n"


# Bounds --------------------------------


def complete_insert_bound(branching: int, leaves: int) -> int:
    return branching * levels_needed(branching, leaves) + SLACK


def deep_insert_bound(leaves: int) -> int:
    return leaves + SLACK


def insert_bound(layout: Layout) -> int:
    if layout.shape == "complete":
        return complete_insert_bound(layout.branching, layout.leaves)
    return deep_insert_bound(layout.leaves)


def total_holons_complete(n_alg: int, n_data: int, b_alg: int, b_data: int) -> int:
    """
    Models plus both complete trees, roots excluded.

    With b = 2 this caps any trained holarchy: every composite below a root has
    at least two subs, so a side with n leaves holds at most 2n - 1 holons.
    """
    return n_data * n_alg + (b_data * n_data - 1) // (b_data - 1) + (b_alg * n_alg - 1) // (b_alg - 1)


def wildcard_message_bound(holons: int, models: int, fetches_per_model: int) -> int:
    """
    Envelopes of one wildcard test: the submission, an ASK and a reply per holon
    of both sides (roots included), and a FETCH / DATA pair per model and dataset.
    """
    return 1 + 2 * (holons + 2) + 2 * models * fetches_per_model


# Reports --------------------------------


def insert_check(trace: HopTrace, layout: Layout) -> BoundCheck:
    label = f"{layout.shape} b={layout.branching} n={layout.leaves} CFP"
    return BoundCheck(trace.conversation_id, label, trace.count(Performative.CFP), insert_bound(layout))


def wildcard_check(trace: HopTrace, holons: int, models: int, fetches_per_model: int) -> BoundCheck:
    label = f"test over {holons} holons, {models} models"
    return BoundCheck(trace.conversation_id, label, len(trace), wildcard_message_bound(holons, models, fetches_per_model))


def holon_total_check(measured: int, n_alg: int, n_data: int) -> BoundCheck:
    label = f"holon total {n_alg}x{n_data} trained"
    return BoundCheck("holons", label, measured, total_holons_complete(n_alg, n_data, 2, 2))


def hop_report(
    traces: Mapping[str, HopTrace],
    inserts: Optional[Mapping[str, Layout]] = None,
    tests: Optional[Mapping[str, Sequence[int]]] = None,
) -> HopReport:
    """
    Compare measured counts with their bounds.

    `inserts` maps sample insert ids to the layout they descended; `tests` maps test
    query ids to (holons, models, fetches per model) of the holarchy they ran on.
    """
    report = HopReport(totals={cid: len(trace) for cid, trace in sorted(traces.items())})
    for cid, layout in sorted((inserts or {}).items()):
        report.checks.append(insert_check(traces.get(cid) or HopTrace(cid), layout))
    for cid, (holons, models, fetches) in sorted((tests or {}).items()):
        report.checks.append(wildcard_check(traces.get(cid) or HopTrace(cid), holons, models, fetches))
    for check in report.checks:
        if not check.passed:
            logger.warning("[HOPS] %s", check)
    return report


# Suite --------------------------------


def _sample_insert(config: Settings, shape: str, branching: int, leaves: int) -> HopReport:
    system = HolarchySystem(config)
    try:
        root = system.runtime.get(ALG_ID)
        if shape == "complete":
            layout = complete_layout(root, branching, leaves)
        else:
            layout = deep_layout(root, leaves)
        query_id = f"sample-{shape}-{branching}-{leaves}"
        system.add(layout.sample, query_id=query_id)
        system.settle_now()
        return hop_report(system.recorder.traces(), inserts={query_id: layout})
    finally:
        system.close()


def _wildcard_test(config: Settings, algorithms: Sequence[str], datasets: Sequence[str]) -> HopReport:
    """Train every algorithm on every dataset, then run one all-vs-all test."""
    system = HolarchySystem(config)
    try:
        specs = [system.load_catalogue_dataset(name)[0] for name in datasets]
        output = OutputConfig(measures=("accuracy", "mse", "fowlkes_mallows", "homogeneity"))
        for i, algorithm in enumerate(algorithms):
            for j, data in enumerate(specs):
                system.train(TrainingQuery(f"t-{i}-{j}", algorithm_entry(algorithm).spec(), data, output))
                system.settle_now()
        query_id = "test-all"
        system.test(TestQuery(query_id, Criteria(), Criteria(), output))
        system.settle_now()
        holons = system.holons()
        total = holon_count(holons) - 3
        models = holon_count(holons, HolonKind.MODEL)
        report = hop_report(system.recorder.traces(), tests={query_id: (total, models, 1)})
        report.checks.append(holon_total_check(total, len(algorithms), len(datasets)))
        return report
    finally:
        system.close()


def run_bound_suite(
    config: Settings,
    branchings: Iterable[int] = (2, 3, 4),
    sizes: Iterable[int] = (4, 16, 64, 256),
    deep_sizes: Iterable[int] = (4, 16, 64),
) -> HopReport:
    """Every check of the sample inserts and the wildcard test; always runs the deterministic scheduler."""
    config = config.model_copy(update={"DETERMINISTIC": True})
    sizes, deep_sizes = list(sizes), list(deep_sizes)
    merged = HopReport(totals={})
    parts = [_sample_insert(config, "complete", b, n) for b in branchings for n in sizes]
    parts += [_sample_insert(config, "deep", 1, n) for n in deep_sizes]
    parts.append(_wildcard_test(config, ["A01", "A03", "A08", "A09", "A17"], ["iris", "art-moon", "diabetes"]))
    for part in parts:
        merged.checks.extend(part.checks)
    logger.info("[HOPS] %d check(s), ok=%s", len(merged.checks), merged.ok)
    return merged
