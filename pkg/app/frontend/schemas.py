"""
schemas.py

pydantic grammar of the files the PRS accepts: query files, resource spec
files and dataset descriptors. `*` is the general symbol in names and values.
"""

from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

ParamInput = Union[str, int, float, bool, None]


class EntityCriteria(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(min_length=1, description="learner family, dataset name, catalogue id or *")
    params: Dict[str, ParamInput] = Field(default_factory=dict)


class OutputSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format: Literal["csv", "json", "plot"] = "csv"
    measures: List[str] = Field(default_factory=lambda: ["accuracy"], min_length=1)
    task_type_hint: Optional[str] = None
    matrix: bool = False


class QueryFile(BaseModel):
    """{id, task, lambda:[...], delta:[...], output:{...}}"""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    id: str = Field(min_length=1)
    task: Literal["train", "test"] = "test"
    lambda_: List[EntityCriteria] = Field(alias="lambda", min_length=1)
    delta: List[EntityCriteria] = Field(min_length=1)
    output: OutputSpec = Field(default_factory=OutputSpec)
    # train only: park the second pass until an explicit release
    hold: bool = False


class DatasetDescriptor(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(min_length=1)
    task_kind: Literal["classification", "regression", "clustering-capable"] = "classification"
    path: Optional[str] = None
    target_column: Optional[str] = None
    normalize: bool = False
    split: Optional[float] = Field(default=None, gt=0, le=1)
    type_chain: List[str] = Field(default_factory=list)
    # catalogue shape to generate instead of reading `path`
    catalogue: Optional[str] = None
    variant: Literal["train", "test"] = "train"


class ResourceFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["algorithm", "data"]
    name: str = Field(min_length=1)
    type_chain: List[str] = Field(default_factory=list)
    params: Dict[str, ParamInput] = Field(default_factory=dict)
    defaults: Dict[str, ParamInput] = Field(default_factory=dict)
    # data only: where the rows come from
    descriptor: Optional[DatasetDescriptor] = None


