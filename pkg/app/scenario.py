"""
scenario.py

Scripted runs over one holarchy.

A scenario is a JSON file with run settings and an ordered list of steps:
add-alg, add-data, query, release, catalogue, snapshot and assert. Every step
settles the runtime before the next one starts, so a scenario replays exactly
under the deterministic scheduler.

Responsibilities:
- pydantic grammar of scenario files (steps discriminated on `op`)
- ScenarioRunner: execute the steps against a HolarchySystem
- assert checks: DOT fixture, holon counts, validity, address chains, rows,
  warnings and coverage of trained pairs
"""

import json
import logging
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Set, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from app.config import Settings
from app.frontend.render import Report
from app.frontend.schemas import DatasetDescriptor, ResourceFile
from app.frontend.validators import load_model
from app.holarchy.inspect import holon_count
from app.holarchy.queries import OutputConfig, TrainingQuery
from app.holarchy.state import HolonKind
from app.ml import catalogue
from app.ml.registry import COMPATIBLE_DATA
from app.system import HolarchySystem, add_resource_file
from app.workflow import run_query

logger = logging.getLogger(__name__)

TRAINING_MEASURES = ("accuracy", "mse", "fowlkes_mallows")


class ScenarioError(Exception):
    """Raised when a scenario step cannot be carried out."""

    def __init__(self, index: int, message: str, exit_code: int = 1) -> None:
        self.index = index
        self.exit_code = exit_code
        super().__init__(f"step {index}: {message}")


class AssertionFailure(ScenarioError):
    """Raised when an assert step does not hold."""

    def __init__(self, index: int, message: str) -> None:
        super().__init__(index, message, exit_code=4)


# Grammar --------------------------------


class _Step(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class AddAlgorithmStep(_Step):
    op: Literal["add-alg"]
    name: str
    type_chain: List[str] = Field(default_factory=list)
    params: Dict[str, Any] = Field(default_factory=dict)
    defaults: Dict[str, Any] = Field(default_factory=dict)
    id: Optional[str] = None


class AddDataStep(_Step):
    op: Literal["add-data"]
    name: str
    type_chain: List[str] = Field(default_factory=list)
    params: Dict[str, Any] = Field(default_factory=dict)
    defaults: Dict[str, Any] = Field(default_factory=dict)
    descriptor: Optional[DatasetDescriptor] = None
    id: Optional[str] = None


class QueryStep(_Step):
    op: Literal["query"]
    query: Optional[Dict[str, Any]] = None
    path: Optional[str] = None
    # validation tests: the query must be rejected
    expect_rejected: bool = False


class ReleaseStep(_Step):
    op: Literal["release"]
    query_id: str


class CatalogueStep(_Step):
    """Add catalogue algorithms and datasets; optionally train every compatible pair."""

    op: Literal["catalogue"]
    algorithms: Optional[List[str]] = None
    datasets: Optional[List[str]] = None
    variants: List[Literal["train", "test"]] = Field(default_factory=lambda: ["train", "test"])
    train: bool = True


class SnapshotStep(_Step):
    op: Literal["snapshot"]
    name: str


class AssertStep(_Step):
    op: Literal["assert"]
    check: Literal["dot", "holons", "valid", "address-chain", "rows", "warning", "covers"]
    fixture: Optional[str] = None
    include_models: bool = True
    kind: Optional[HolonKind] = None
    count: Optional[int] = None
    query: Optional[str] = None
    start: Optional[str] = None
    length: Optional[int] = None
    ends: Optional[HolonKind] = None
    labels: Optional[List[str]] = None
    measures: Optional[List[str]] = None
    min_rows: int = 0
    contains: Optional[str] = None


Step = Annotated[
    Union[AddAlgorithmStep, AddDataStep, QueryStep, ReleaseStep, CatalogueStep, SnapshotStep, AssertStep],
    Field(discriminator="op"),
]


class Scenario(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    seed: Optional[int] = None
    deterministic: Optional[bool] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    strict_cfp: Optional[bool] = None
    steps: List[Step] = Field(default_factory=list)

    def apply(self, base: Settings) -> Settings:
        """Settings for this scenario; validation (0 < beta < alpha < 1) runs again."""
        overrides = {
            "SEED": self.seed,
            "DETERMINISTIC": self.deterministic,
            "SIM_ALPHA": self.alpha,
            "SIM_BETA": self.beta,
            "STRICT_CFP": self.strict_cfp,
        }
        values = base.model_dump()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return Settings(**values)


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(0, f"cannot read scenario {path}: {e}") from e
    return load_model(Scenario, text)


# Runner --------------------------------


class ScenarioRunner:
    def __init__(self, system: HolarchySystem, base_dir: Union[str, Path], out_dir: Union[str, Path]) -> None:
        self.system = system
        self.base_dir = Path(base_dir)
        self.out_dir = Path(out_dir)
        # query file id -> expanded operation ids
        self.queries: Dict[str, List[str]] = {}

    async def run(self, scenario: Scenario) -> int:
        logger.info("[SCENARIO] %s: %d step(s)", scenario.name, len(scenario.steps))
        for index, step in enumerate(scenario.steps, start=1):
            logger.info("[SCENARIO] step %d: %s", index, step.op)
            await self.run_step(index, step)
        logger.info("[SCENARIO] %s passed", scenario.name)
        return len(scenario.steps)

    async def run_step(self, index: int, step: Step) -> None:
        if isinstance(step, AssertStep):
            self.check(index, step)
            return
        if isinstance(step, QueryStep):
            await self._query(index, step)
            return
        if isinstance(step, SnapshotStep):
            self._snapshot(step)
            return

        if isinstance(step, (AddAlgorithmStep, AddDataStep)):
            resource = ResourceFile(
                kind="algorithm" if isinstance(step, AddAlgorithmStep) else "data",
                name=step.name,
                type_chain=step.type_chain,
                params=step.params,
                defaults=step.defaults,
                descriptor=getattr(step, "descriptor", None),
            )
            add_resource_file(self.system, resource, self.base_dir, step.id)
        elif isinstance(step, ReleaseStep):
            self.system.release(step.query_id)
        elif isinstance(step, CatalogueStep):
            await self._catalogue(step)
            return
        await self.system.settle()
        self._raise_failures(index)

    def _raise_failures(self, index: int) -> None:
        for query_id, outcome in self.system.sys.outcomes.items():
            if outcome.kind == "add" and outcome.errors:
                raise ScenarioError(index, f"{query_id} failed: {'; '.join(outcome.errors)}")

    # Steps --------------------------------

    async def _query(self, index: int, step: QueryStep) -> None:
        if step.query is not None:
            raw: Any = step.query
        elif step.path:
            try:
                raw = (self.base_dir / step.path).read_text(encoding="utf-8")
            except OSError as e:
                raise ScenarioError(index, f"cannot read query {step.path}: {e}") from e
        else:
            raise ScenarioError(index, "query steps need `query` or `path`")

        state = await run_query(self.system, raw, self.out_dir)
        if step.expect_rejected:
            if state.exit_code != 3:
                raise AssertionFailure(index, "query was expected to be rejected")
            return
        if state.exit_code == 3:
            raise ScenarioError(index, "; ".join(state.diagnostics), exit_code=3)
        if state.exit_code != 0:
            raise ScenarioError(index, f"query {state.query_id} failed")
        self.queries[state.query_id] = list(state.operation_ids)

    def trained_pairs(self) -> Set[Tuple[str, str]]:
        """(algorithm holon, dataset name) of every training that produced rows without error."""
        pairs = set()
        for outcome in self.system.sys.outcomes.values():
            if outcome.kind == "train":
                pairs.update((row.algorithm_id, row.dataset_name) for row in outcome.rows if row.error is None)
        return pairs

    async def _catalogue(self, step: CatalogueStep) -> None:
        system = self.system
        algorithms = step.algorithms or catalogue.algorithm_ids()
        datasets = step.datasets or catalogue.dataset_names()
        for algorithm in algorithms:
            system.add_algorithm(algorithm, query_id=f"add-{algorithm}")
            await system.settle()
        specs = {}
        for name in datasets:
            for variant in step.variants:
                specs[(name, variant)] = system.load_catalogue_dataset(name, variant)[0]
                system.add(specs[(name, variant)], query_id=f"add-{name}-{variant}")
                await system.settle()
        if not step.train or "train" not in step.variants:
            return

        output = OutputConfig(measures=TRAINING_MEASURES)
        trained = 0
        for algorithm in algorithms:
            entry = catalogue.algorithm_entry(algorithm)
            for name in datasets:
                if catalogue.dataset_kind(name) not in COMPATIBLE_DATA[entry.task]:
                    continue
                query_id = f"train-{algorithm}-{name}"
                system.train(TrainingQuery(query_id, entry.spec(), specs[(name, "train")], output))
                await system.settle()
                trained += 1
        logger.info("[SCENARIO] catalogue trained %d pair(s)", trained)

    def _snapshot(self, step: SnapshotStep) -> None:
        target = self.out_dir / "snapshots"
        target.mkdir(parents=True, exist_ok=True)
        (target / f"{step.name}.json").write_text(
            json.dumps(self.system.snapshot(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        (target / f"{step.name}.dot").write_text(self.system.export_dot(), encoding="utf-8")

    # Checks --------------------------------

    def check(self, index: int, step: AssertStep) -> None:
        checker = {
            "dot": self._check_dot,
            "holons": self._check_holons,
            "valid": self._check_valid,
            "address-chain": self._check_address_chain,
            "rows": self._check_rows,
            "warning": self._check_warning,
            "covers": self._check_covers,
        }[step.check]
        problem = checker(step)
        if problem:
            logger.error("[SCENARIO] assert %s failed: %s", step.check, problem)
            raise AssertionFailure(index, f"{step.check}: {problem}")
        logger.info("[SCENARIO] assert %s ok", step.check)

    def _report(self, query_id: Optional[str]) -> Report:
        if not query_id:
            raise KeyError("this check needs `query`")
        return self.system.report(query_id, self.queries.get(query_id, [query_id]))

    def _check_dot(self, step: AssertStep) -> Optional[str]:
        expected = (self.base_dir / step.fixture).read_text(encoding="utf-8")
        actual = self.system.export_dot(step.include_models)
        if actual != expected:
            return f"DOT differs from {step.fixture}:\n{actual}"
        return None

    def _check_holons(self, step: AssertStep) -> Optional[str]:
        found = holon_count(self.system.holons(), step.kind)
        if found != step.count:
            return f"expected {step.count} holons, found {found}"
        return None

    def _check_valid(self, step: AssertStep) -> Optional[str]:
        report = self.system.validate()
        return None if report.ok else str(report)

    def _check_address_chain(self, step: AssertStep) -> Optional[str]:
        chain = self.system.address_chain(step.start, step.query)
        if step.length is not None and len(chain) != step.length:
            return f"chain {chain} has {len(chain)} holons, expected {step.length}"
        if step.ends is not None:
            last = self.system.holons()[chain[-1]].state.kind
            if last is not step.ends:
                return f"chain {chain} ends at a {last.value} holon, expected {step.ends.value}"
        return None

    def _check_rows(self, step: AssertStep) -> Optional[str]:
        report = self._report(step.query)
        rows = [row for row in report.rows if row.error is None]
        if len(rows) < step.min_rows:
            return f"{len(rows)} row(s), expected at least {step.min_rows}"
        if step.labels is not None:
            labels = {row.label or row.algorithm_name for row in rows}
            if labels != set(step.labels):
                return f"labels {sorted(labels)} != {sorted(step.labels)}"
        if step.measures is not None:
            measures = {row.measure for row in rows}
            if measures != set(step.measures):
                return f"measures {sorted(measures)} != {sorted(step.measures)}"
        return None

    def _check_warning(self, step: AssertStep) -> Optional[str]:
        report = self._report(step.query)
        if not any(step.contains in warning for warning in report.warnings):
            return f"no warning containing {step.contains!r} in {report.warnings}"
        return None

    def _check_covers(self, step: AssertStep) -> Optional[str]:
        report = self._report(step.query)
        found = {(row.algorithm_id, row.dataset_name) for row in report.rows if row.error is None}
        missing = sorted(self.trained_pairs() - found)
        if missing:
            return f"{len(missing)} trained pair(s) missing, e.g. {missing[:5]}"
        return None


async def run_scenario(
    path: Union[str, Path],
    base: Settings,
    out_dir: Union[str, Path],
    trace_path: Optional[str] = None,
) -> HolarchySystem:
    """Load, configure and run a scenario file; returns the settled system."""
    path = Path(path)
    scenario = load_scenario(path)
    config = scenario.apply(base)
    sink = open(trace_path, "w", encoding="utf-8") if trace_path else None
    try:
        system = HolarchySystem(config, trace_sink=sink)
    except Exception:
        if sink is not None:
            sink.close()
        raise
    try:
        await ScenarioRunner(system, path.parent, out_dir).run(scenario)
    finally:
        system.close()
    return system
