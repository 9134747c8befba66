"""
messages.py

Envelopes, performatives and hop accounting.

Responsibilities:
- Define the routed message value exchanged between holons
- Keep an append-only per-conversation hop trace with performative counters
- Render envelopes as JSON lines for the optional trace file
"""

import json
from collections import Counter
from dataclasses import dataclass, field, fields, is_dataclass
from enum import Enum
from types import MappingProxyType
from typing import Any, Dict, List, Mapping, Optional, TextIO

import numpy as np
from pydantic import BaseModel


class Performative(str, Enum):
    CFP = "CFP"
    PROPOSE = "PROPOSE"
    ASK = "ASK"
    INFORM = "INFORM"
    RESULT = "RESULT"


@dataclass(frozen=True)
class Envelope:
    sender: str
    to: str
    performative: Performative
    conversation_id: str
    verb: str
    payload: Mapping[str, Any] = field(default_factory=dict)
    seq: int = 0

    def __post_init__(self) -> None:
        if not self.conversation_id:
            raise ValueError("envelopes need a conversation id")
        object.__setattr__(self, "payload", MappingProxyType(dict(self.payload)))

    def stamped(self, seq: int) -> "Envelope":
        return Envelope(self.sender, self.to, self.performative, self.conversation_id, self.verb, self.payload, seq)

    def describe(self) -> Dict[str, Any]:
        return {
            "seq": self.seq,
            "from": self.sender,
            "to": self.to,
            "performative": self.performative.value,
            "conversation": self.conversation_id,
            "verb": self.verb,
            "payload": {key: _jsonable(value) for key, value in sorted(self.payload.items())},
        }


def _jsonable(value: Any) -> Any:
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in sorted(value.items(), key=lambda kv: str(kv[0]))}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return sorted(str(v) for v in value)
    if isinstance(value, np.ndarray):
        return f"ndarray{list(value.shape)}"
    if is_dataclass(value) and not isinstance(value, type):
        if type(value).__str__ is not object.__str__:
            return str(value)
        return {f.name: _jsonable(getattr(value, f.name)) for f in fields(value)}
    return str(value)


@dataclass(frozen=True)
class HopRecord:
    seq: int
    sender: str
    to: str
    performative: Performative
    verb: str


class HopTrace:
    """Append-only record of the envelopes of one conversation."""

    def __init__(self, conversation_id: str) -> None:
        self.conversation_id = conversation_id
        self.records: List[HopRecord] = []
        self.counters: Counter = Counter()

    def append(self, env: Envelope) -> None:
        self.records.append(HopRecord(env.seq, env.sender, env.to, env.performative, env.verb))
        self.counters[env.performative] += 1

    def count(self, performative: Optional[Performative] = None, verb: Optional[str] = None) -> int:
        if verb is None:
            return self.counters[performative] if performative else len(self.records)
        return sum(
            1
            for record in self.records
            if record.verb == verb and (performative is None or record.performative is performative)
        )

    def __len__(self) -> int:
        return len(self.records)


class TraceRecorder:
    """Collects hop traces per conversation and mirrors them to a JSON-lines sink."""

    def __init__(self, sink: Optional[TextIO] = None) -> None:
        self._traces: Dict[str, HopTrace] = {}
        self._sink = sink

    def record(self, env: Envelope) -> None:
        trace = self._traces.get(env.conversation_id)
        if trace is None:
            trace = self._traces[env.conversation_id] = HopTrace(env.conversation_id)
        trace.append(env)
        if self._sink is not None:
            self._sink.write(json.dumps(env.describe(), sort_keys=True) + "\n")

    def trace(self, conversation_id: str) -> HopTrace:
        return self._traces.get(conversation_id) or HopTrace(conversation_id)

    def traces(self) -> Dict[str, HopTrace]:
        return dict(self._traces)

    def close(self) -> None:
        if self._sink is not None:
            self._sink.flush()
            self._sink.close()
            self._sink = None
