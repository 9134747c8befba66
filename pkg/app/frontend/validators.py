"""
validators.py

The PRS step: turn query text into validated, expanded holarchy operations.

Every problem becomes a Diagnostic carrying a JSON path, the expected form and
the offending value; nothing is dispatched while any diagnostic remains.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Mapping, Optional, Sequence, Tuple, Type, TypeVar, Union

from pydantic import BaseModel, ValidationError

from app.algebra.params import STAR, AlgebraError, ParamSet, canonical_token
from app.frontend.schemas import EntityCriteria, QueryFile
from app.holarchy.queries import (
    KNOWN_MEASURES,
    Criteria,
    OutputConfig,
    TestQuery,
    TrainingQuery,
)
from app.holarchy.schema import SchemaError, SchemaRegistry
from app.holarchy.state import EntityKind, ResourceSpec
from app.ml.catalogue import algorithm_entry
from app.ml.registry import LearnerRegistry

logger = logging.getLogger(__name__)

M = TypeVar("M", bound=BaseModel)
Operation = Union[TrainingQuery, TestQuery]


@dataclass(frozen=True)
class Diagnostic:
    path: str
    message: str
    expected: str = ""
    value: Any = None

    def __str__(self) -> str:
        text = f"{self.path}: {self.message}"
        if self.expected:
            text += f" (expected {self.expected}"
            text += f", got {self.value!r})" if self.value is not None else ")"
        return text


class QueryValidationError(Exception):
    """Raised when a query or resource file fails validation; carries every diagnostic."""

    def __init__(self, diagnostics: Sequence[Diagnostic]) -> None:
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


@dataclass
class ParsedQuery:
    query_id: str
    task: Literal["train", "test"]
    output: OutputConfig
    operations: List[Operation] = field(default_factory=list)


def json_path(loc: Sequence[Union[str, int]]) -> str:
    path = "$"
    for part in loc:
        path += f"[{part}]" if isinstance(part, int) else f".{part}"
    return path


# Decoding --------------------------------


def load_model(model: Type[M], raw: Union[str, bytes, Mapping[str, Any]]) -> M:
    """Decode JSON text (or an already decoded mapping) into `model`."""
    if isinstance(raw, (str, bytes)):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as e:
            raise QueryValidationError(
                [Diagnostic("$", f"malformed JSON at line {e.lineno} column {e.colno}: {e.msg}", "a JSON object")]
            ) from e
    if not isinstance(raw, Mapping):
        raise QueryValidationError([Diagnostic("$", "top level must be an object", "a JSON object", type(raw).__name__)])
    try:
        return model.model_validate(raw)
    except ValidationError as e:
        raise QueryValidationError(
            [
                Diagnostic(json_path(err["loc"]), err["msg"], err["type"], err.get("input"))
                for err in e.errors()
            ]
        ) from e


# Specs --------------------------------


def resolve_catalogue_id(name: str, params: Mapping[str, Any]) -> Tuple[str, Dict[str, Any]]:
    """`A03` style ids stand for a family plus its overrides; explicit params win."""
    try:
        entry = algorithm_entry(name)
    except KeyError:
        return name, dict(params)
    return entry.family, {**entry.overrides, **params}


def _param_set(values: Mapping[str, Any], path: str, concrete: bool, problems: List[Diagnostic]) -> Optional[ParamSet]:
    if concrete:
        for param, value in values.items():
            try:
                general = canonical_token(value) is STAR
            except AlgebraError:
                general = False
            if general:
                problems.append(Diagnostic(f"{path}.{param}", "training needs concrete values", "a literal", value))
    try:
        return ParamSet.of(values)
    except AlgebraError as e:
        problems.append(Diagnostic(path, str(e), "parameter/value pairs", dict(values)))
        return None


def algorithm_spec(
    criteria: EntityCriteria,
    path: str,
    registry: LearnerRegistry,
    schemas: SchemaRegistry,
    problems: List[Diagnostic],
) -> Optional[ResourceSpec]:
    """Concrete, schema-normalized algorithm spec, or None with diagnostics appended."""
    if criteria.name.strip() == "*":
        problems.append(Diagnostic(f"{path}.name", "training needs a concrete algorithm name", "a learner name", "*"))
        return None
    name, values = resolve_catalogue_id(criteria.name, criteria.params)
    if name not in registry:
        problems.append(Diagnostic(f"{path}.name", "unknown learner", f"one of {registry.names()}", criteria.name))
        return None
    learner = registry.get(name)
    unknown = sorted(set(values) - set(learner.defaults))
    if unknown:
        problems.append(
            Diagnostic(f"{path}.params", f"unknown parameter(s) {unknown} for {name}", f"a subset of {sorted(learner.defaults)}", criteria.params)
        )
        return None
    params = _param_set(values, f"{path}.params", True, problems)
    if params is None or problems:
        return None
    spec = ResourceSpec(
        EntityKind.ALGORITHM,
        name,
        params,
        type_chain=(learner.task.value,),
        defaults=ParamSet.of(learner.defaults),
    )
    try:
        return schemas.normalize(spec, record=False)
    except SchemaError as e:
        problems.append(Diagnostic(f"{path}.params", str(e), "parameters of the family schema", criteria.params))
        return None


def dataset_spec(
    criteria: EntityCriteria,
    path: str,
    schemas: SchemaRegistry,
    problems: List[Diagnostic],
) -> Optional[ResourceSpec]:
    if criteria.name.strip() == "*":
        problems.append(Diagnostic(f"{path}.name", "training needs a concrete dataset name", "a dataset name", "*"))
        return None
    params = _param_set(criteria.params, f"{path}.params", True, problems)
    if params is None:
        return None
    try:
        return schemas.normalize(ResourceSpec(EntityKind.DATA, criteria.name, params), record=False)
    except SchemaError as e:
        problems.append(Diagnostic(f"{path}.params", str(e), "parameters of the dataset schema", criteria.params))
        return None


def criteria_from(
    criteria: EntityCriteria,
    path: str,
    registry: Optional[LearnerRegistry],
    problems: List[Diagnostic],
) -> Optional[Criteria]:
    name, values = criteria.name.strip(), dict(criteria.params)
    if registry is not None and name != "*":
        name, values = resolve_catalogue_id(name, values)
        if name not in registry:
            problems.append(Diagnostic(f"{path}.name", "unknown learner", f"* or one of {registry.names()}", criteria.name))
            return None
    params = _param_set(values, f"{path}.params", False, problems)
    return Criteria(name, params) if params is not None else None


# Queries --------------------------------


def _output(query: QueryFile, problems: List[Diagnostic]) -> Optional[OutputConfig]:
    for i, measure in enumerate(query.output.measures):
        if measure not in KNOWN_MEASURES:
            problems.append(Diagnostic(f"$.output.measures[{i}]", "unknown measure", f"one of {list(KNOWN_MEASURES)}", measure))
    if problems:
        return None
    return OutputConfig(
        format=query.output.format,
        measures=tuple(query.output.measures),
        task_type_hint=query.output.task_type_hint,
        matrix=query.output.matrix,
    )


def expanded_ids(query_id: str, count: int) -> List[str]:
    if count == 1:
        return [query_id]
    return [f"{query_id}.{k}" for k in range(1, count + 1)]


def parse_and_validate(
    raw: Union[str, bytes, Mapping[str, Any]],
    registry: LearnerRegistry,
    schemas: SchemaRegistry,
) -> ParsedQuery:
    """
    Validate a query file and expand its |lambda| x |delta| pairs into single-pair operations.

    Raises QueryValidationError with every diagnostic found.
    """
    query = load_model(QueryFile, raw)
    problems: List[Diagnostic] = []
    output = _output(query, problems)

    if query.hold and query.task != "train":
        problems.append(Diagnostic("$.hold", "only training queries can be held", "false", True))

    operations: List[Operation] = []
    if query.task == "train":
        algorithms = [algorithm_spec(c, f"$.lambda[{i}]", registry, schemas, problems) for i, c in enumerate(query.lambda_)]
        datasets = [dataset_spec(c, f"$.delta[{j}]", schemas, problems) for j, c in enumerate(query.delta)]
        if not problems:
            pairs = [(a, d) for a in algorithms for d in datasets]
            for query_id, (a, d) in zip(expanded_ids(query.id, len(pairs)), pairs):
                operations.append(TrainingQuery(query_id, a, d, output, hold=query.hold))
    else:
        algorithms = [criteria_from(c, f"$.lambda[{i}]", registry, problems) for i, c in enumerate(query.lambda_)]
        datasets = [criteria_from(c, f"$.delta[{j}]", None, problems) for j, c in enumerate(query.delta)]
        if not problems:
            pairs = [(a, d) for a in algorithms for d in datasets]
            for query_id, (a, d) in zip(expanded_ids(query.id, len(pairs)), pairs):
                operations.append(TestQuery(query_id, a, d, output))

    if problems:
        logger.warning("[PRS] query %s rejected with %d diagnostic(s)", query.id, len(problems))
        raise QueryValidationError(problems)

    logger.info("[PRS] query %s (%s) expanded into %d operation(s)", query.id, query.task, len(operations))
    return ParsedQuery(query.id, query.task, output, operations)
