"""
queries.py

Requests travelling through the holarchy and the rows they produce.

Insert and training requests carry concrete specs; test criteria may use `*`
in names and values. OutputConfig and ResultRow are pydantic models because
they cross into reporting and JSON output.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.algebra.params import EMPTY, ParamPair, ParamSet
from app.holarchy.state import EntityKind, HolonId, ResourceSpec, StructuralError

KNOWN_MEASURES = ("accuracy", "mse", "fowlkes_mallows", "homogeneity")


class InsertMode(str, Enum):
    ADD_ONLY = "add-only"
    TRAIN_FIRST_PASS = "train-first-pass"


class OutputConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    format: Literal["csv", "json", "plot"] = "csv"
    measures: Tuple[str, ...] = Field(default=("accuracy",), min_length=1)
    task_type_hint: Optional[str] = None
    matrix: bool = False

    @field_validator("measures")
    @classmethod
    def _known(cls, measures: Tuple[str, ...]) -> Tuple[str, ...]:
        unknown = [m for m in measures if m not in KNOWN_MEASURES]
        if unknown:
            raise ValueError(f"unknown measure(s) {unknown}; expected one of {list(KNOWN_MEASURES)}")
        return measures


@dataclass(frozen=True)
class InsertRequest:
    spec: ResourceSpec
    query_id: str
    mode: InsertMode = InsertMode.ADD_ONLY
    # the other side of a training pair, kept for the model holon's KB
    companion: Optional[ResourceSpec] = None
    # dataset value handed to a data holon created by this request
    resource: Optional[object] = None

    def __post_init__(self) -> None:
        if self.spec.entity_kind not in (EntityKind.ALGORITHM, EntityKind.DATA):
            raise StructuralError(f"only algorithms and datasets are inserted, got {self.spec.entity_kind.value}")


@dataclass(frozen=True)
class TrainingQuery:
    query_id: str
    algorithm: ResourceSpec
    dataset: ResourceSpec
    output: OutputConfig = field(default_factory=OutputConfig)
    hold: bool = False

    def __post_init__(self) -> None:
        for spec in (self.algorithm, self.dataset):
            if spec.name == "*" or spec.params.is_general:
                raise StructuralError(f"training needs concrete specs, got {spec}")


@dataclass(frozen=True)
class Criteria:
    """(name, params) with `*` allowed in both."""

    name: str = "*"
    params: ParamSet = EMPTY

    @property
    def name_pair(self) -> ParamPair:
        return ParamPair("name", self.name)

    def __str__(self) -> str:
        return f"({self.name}, {self.params})"


@dataclass(frozen=True)
class TestQuery:
    query_id: str
    algorithm_criteria: Criteria = field(default_factory=Criteria)
    data_criteria: Criteria = field(default_factory=Criteria)
    output: OutputConfig = field(default_factory=OutputConfig)

    __test__ = False  # not a pytest class


@dataclass(frozen=True)
class ResolvedDataset:
    holon: HolonId
    name: str
    params: ParamSet


class ResultRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    query_id: str
    algorithm_id: HolonId
    algorithm_name: str
    algorithm_params: str
    model_id: Optional[HolonId] = None
    dataset_name: str
    dataset_holon: Optional[HolonId] = None
    measure: str
    value: Optional[float] = None
    elapsed: float = 0.0
    phase: Literal["train", "test"] = "test"
    label: Optional[str] = None
    error: Optional[str] = None


@dataclass
class QueryOutcome:
    """What SYS knows about a finished (or failed) query."""

    query_id: str
    kind: Literal["add", "train", "test"]
    rows: List[ResultRow] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    errors: List[str] = field(default_factory=list)
    done: bool = False
    incomplete: bool = False
    holon: Optional[HolonId] = None
