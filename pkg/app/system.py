"""
system.py

Facade over one running holarchy.

Responsibilities:
- Build the runtime, learner registry, schema registry and dataset store from Settings
- Bootstrap SYS, ALG and DATA
- Submit add / train / release / test requests to SYS as the PRS would
- Settle the runtime and turn SYS outcomes into Reports
- Expose read-only views (validation, DOT, snapshot, address chains)
"""

import itertools
import logging
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, TextIO, Tuple, Union

from app.algebra.operators import SimilarityConfig
from app.algebra.params import ParamSet
from app.config import Settings, settings as default_settings
from app.frontend.render import Report
from app.frontend.schemas import DatasetDescriptor, ResourceFile
from app.frontend.validators import ParsedQuery, resolve_catalogue_id
from app.holarchy.base import HolarchyContext
from app.holarchy.holons import SystemHolon, bootstrap, row_order
from app.holarchy.inspect import (
    ValidationReport,
    address_chain,
    export_dot,
    snapshot,
    validate_holarchy,
)
from app.holarchy.queries import (
    InsertRequest,
    OutputConfig,
    QueryOutcome,
    TestQuery,
    TrainingQuery,
)
from app.holarchy.schema import SchemaRegistry
from app.holarchy.state import SYS_ID, EntityKind, ResourceSpec
from app.ml import catalogue
from app.ml.datasets import Dataset, DatasetKind, DatasetStore, IngestionError, load_dataset
from app.ml.registry import LearnerRegistry, build_registry
from app.runtime.messages import Envelope, Performative, TraceRecorder
from app.runtime.scheduler import Runtime

logger = logging.getLogger(__name__)

PRS = "PRS"


class HolarchySystem:
    def __init__(
        self,
        config: Optional[Settings] = None,
        registry: Optional[LearnerRegistry] = None,
        trace_sink: Optional[TextIO] = None,
    ) -> None:
        self.settings = config or default_settings
        self.registry = registry or build_registry()
        self.schemas = SchemaRegistry()
        self.datasets = DatasetStore()
        self.recorder = TraceRecorder(trace_sink)
        self.runtime = Runtime(
            seed=self.settings.SEED,
            deterministic=self.settings.DETERMINISTIC,
            cfp_timeout=self.settings.CFP_TIMEOUT,
            max_workers=self.settings.MAX_WORKERS,
            recorder=self.recorder,
        )
        self.ctx = HolarchyContext(
            runtime=self.runtime,
            registry=self.registry,
            similarity=SimilarityConfig(alpha=self.settings.SIM_ALPHA, beta=self.settings.SIM_BETA),
            strict_cfp=self.settings.STRICT_CFP,
            strict_skill_match=self.settings.STRICT_SKILL_MATCH,
            seed=self.settings.SEED,
            labels=catalogue.label_index(),
        )
        self.sys: SystemHolon = bootstrap(self.ctx)
        self._add_ids = itertools.count(1)
        logger.info(
            "[SYSTEM] ready (seed=%d, deterministic=%s, alpha=%s, beta=%s)",
            self.settings.SEED,
            self.settings.DETERMINISTIC,
            self.settings.SIM_ALPHA,
            self.settings.SIM_BETA,
        )

    # Submission --------------------------------

    def _submit(self, query_id: str, verb: str, **payload) -> str:
        self.runtime.send(Envelope(PRS, SYS_ID, Performative.ASK, query_id, verb, payload))
        return query_id

    def normalize(self, spec: ResourceSpec) -> ResourceSpec:
        """Fill the family defaults in; learners contribute theirs for algorithm specs."""
        if spec.entity_kind is EntityKind.ALGORITHM and not spec.defaults and spec.name in self.registry:
            learner = self.registry.get(spec.name)
            spec = ResourceSpec(
                spec.entity_kind,
                spec.name,
                spec.params,
                type_chain=spec.type_chain or (learner.task.value,),
                defaults=ParamSet.of(learner.defaults),
            )
        return self.schemas.normalize(spec)

    def add(self, spec: ResourceSpec, dataset: Optional[Dataset] = None, query_id: Optional[str] = None) -> str:
        spec = self.normalize(spec)
        if dataset is not None:
            self.datasets.put(spec.params, dataset)
        elif spec.entity_kind is EntityKind.DATA:
            dataset = self.datasets.get(spec.name, spec.params)
        query_id = query_id or f"add-{next(self._add_ids):04d}"
        request = InsertRequest(spec, query_id, resource=dataset)
        return self._submit(query_id, "ADD", request=request)

    def add_algorithm(
        self,
        name: str,
        params: Optional[Dict] = None,
        query_id: Optional[str] = None,
        type_chain: Sequence[str] = (),
        defaults: Optional[Dict] = None,
    ) -> str:
        """Add a learner family member; catalogue ids such as `A03` expand to family plus overrides."""
        family, values = resolve_catalogue_id(name, params or {})
        spec = ResourceSpec(
            EntityKind.ALGORITHM,
            family,
            ParamSet.of(values),
            type_chain=tuple(type_chain),
            defaults=ParamSet.of(defaults or {}),
        )
        return self.add(spec, query_id=query_id)

    def add_catalogue_dataset(self, name: str, variant: str = catalogue.TRAIN, query_id: Optional[str] = None) -> str:
        spec, dataset = self.load_catalogue_dataset(name, variant)
        return self.add(spec, dataset, query_id)

    def load_catalogue_dataset(self, name: str, variant: str = catalogue.TRAIN) -> Tuple[ResourceSpec, Dataset]:
        spec = self.normalize(catalogue.dataset_spec(name, variant))
        dataset = catalogue.make_dataset(name, variant, split=self.settings.TRAIN_SPLIT)
        self.datasets.put(spec.params, dataset)
        return spec, dataset

    def train(self, query: TrainingQuery) -> str:
        algorithm = self.normalize(query.algorithm)
        data = self.normalize(query.dataset)
        query = TrainingQuery(query.query_id, algorithm, data, query.output, hold=query.hold)
        resource = self.datasets.get(data.name, data.params)
        return self._submit(query.query_id, "TRAIN", query=query, resource=resource)

    def release(self, query_id: str) -> str:
        return self._submit(query_id, "RELEASE")

    def test(self, query: TestQuery) -> str:
        return self._submit(query.query_id, "TEST", query=query)

    def submit_one(self, operation: Union[TrainingQuery, TestQuery]) -> str:
        if isinstance(operation, TrainingQuery):
            return self.train(operation)
        return self.test(operation)

    def submit(self, parsed: ParsedQuery) -> List[str]:
        return [self.submit_one(operation) for operation in parsed.operations]

    # Settling --------------------------------

    def settle_now(self) -> int:
        """Deterministic mode: handle mail until idle."""
        steps = self.runtime.run_until_idle()
        self._close_open_outcomes()
        return steps

    async def settle(self) -> None:
        await self.runtime.settle()
        self._close_open_outcomes()

    def _close_open_outcomes(self) -> None:
        for query_id, outcome in self.sys.outcomes.items():
            training = self.sys.trainings.get(query_id)
            if outcome.done or (training is not None and training.query.hold and not training.released):
                continue
            logger.warning("[SYSTEM] %s never completed", query_id)
            outcome.incomplete = True
            outcome.done = True

    # Outcomes --------------------------------

    def outcome(self, query_id: str) -> QueryOutcome:
        try:
            return self.sys.outcome(query_id)
        except KeyError as e:
            raise KeyError(f"no query '{query_id}' was submitted") from e

    def report(self, query_id: str, operation_ids: Sequence[str], output: Optional[OutputConfig] = None) -> Report:
        """Merge the outcomes of an expanded query into one Report."""
        output = output or OutputConfig()
        rows, warnings, errors, incomplete = [], [], [], False
        for operation_id in operation_ids:
            outcome = self.outcome(operation_id)
            rows.extend(outcome.rows)
            warnings.extend(outcome.warnings)
            errors.extend(outcome.errors)
            incomplete = incomplete or outcome.incomplete
        return Report(
            query_id=query_id,
            rows=sorted(rows, key=row_order),
            warnings=warnings,
            errors=errors,
            format=output.format,
            matrix=output.matrix,
            incomplete=incomplete,
        )

    def report_for(self, parsed: ParsedQuery) -> Report:
        return self.report(parsed.query_id, [op.query_id for op in parsed.operations], parsed.output)

    # Views --------------------------------

    def holons(self):
        return self.runtime.holons()

    def validate(self) -> ValidationReport:
        return validate_holarchy(self.holons())

    def export_dot(self, include_models: bool = True) -> str:
        return export_dot(self.holons(), include_models)

    def snapshot(self) -> Dict:
        return snapshot(self.holons())

    def address_chain(self, start: str, query_id: str) -> List[str]:
        return address_chain(self.holons(), start, query_id)

    def close(self) -> None:
        self.runtime.shutdown()


# Resource files --------------------------------


def dataset_from_descriptor(
    descriptor: DatasetDescriptor, base_dir: Path, default_split: float
) -> Tuple[Dict, Dataset]:
    """(extra spec params, dataset) for a descriptor; catalogue shapes are tagged with their variant."""
    split = descriptor.split or default_split
    if descriptor.catalogue:
        try:
            dataset = catalogue.make_dataset(descriptor.catalogue, descriptor.variant, split=split)
        except KeyError as e:
            raise IngestionError(str(e)) from e
        return {"type": descriptor.variant}, dataset
    if not descriptor.path:
        raise IngestionError(f"dataset {descriptor.name} needs a path or a catalogue shape")
    path = Path(descriptor.path)
    if not path.is_absolute():
        path = base_dir / path
    dataset = load_dataset(
        path,
        descriptor.name,
        DatasetKind(descriptor.task_kind),
        descriptor.target_column,
        descriptor.normalize,
        split,
    )
    return {}, dataset


def add_resource_file(
    system: HolarchySystem,
    resource: ResourceFile,
    base_dir: Union[str, Path] = ".",
    query_id: Optional[str] = None,
) -> str:
    """Submit the ADD for a parsed resource spec file."""
    if resource.kind == "algorithm":
        return system.add_algorithm(
            resource.name,
            dict(resource.params),
            query_id,
            type_chain=resource.type_chain,
            defaults=dict(resource.defaults),
        )

    params = dict(resource.params)
    dataset = None
    type_chain = tuple(resource.type_chain)
    if resource.descriptor is not None:
        extra, dataset = dataset_from_descriptor(resource.descriptor, Path(base_dir), system.settings.TRAIN_SPLIT)
        if dataset.name != resource.name:
            dataset = replace(dataset, name=resource.name)
        params = {**extra, **params}
        type_chain = type_chain or tuple(resource.descriptor.type_chain) or (dataset.task_kind.value,)
    spec = ResourceSpec(
        EntityKind.DATA,
        resource.name,
        ParamSet.of(params),
        type_chain=type_chain,
        defaults=ParamSet.of(resource.defaults),
    )
    return system.add(spec, dataset, query_id)
