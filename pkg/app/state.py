from typing import Any, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

QueryStep = Literal[
    "START",
    "VALIDATE",
    "TRAIN",
    "TEST",
    "REJECT",
    "RENDER",
    "END",
]


class QueryState(BaseModel):
    """
    Authoritative record of one query file on its way through PRS -> SYS -> VIZ.
    The workflow routes on `step`; nodes only fill their own fields.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    step: str = "START"

    # Input
    raw: Any = Field(default=None, description="query JSON text or decoded mapping")
    query_id: Optional[str] = None
    task: Optional[Literal["train", "test"]] = None

    # PRS
    parsed: Optional[Any] = Field(default=None, description="ParsedQuery once validation passed")
    diagnostics: List[str] = Field(default_factory=list)

    # SYS
    operation_ids: List[str] = Field(default_factory=list)

    # VIZ
    report: Optional[Any] = Field(default=None, description="Report built from the SYS outcomes")
    files: List[str] = Field(default_factory=list)

    exit_code: int = 0
