"""
params.py

Parametric sets: the value type behind capabilities, skills and query criteria.

Responsibilities:
- Canonicalize raw values (CLI strings, JSON numbers, booleans) into comparable tokens
- Represent the general symbol `*`
- Keep at most one pair per parameter identifier, sorted for a stable text form
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, Iterator, Mapping, Tuple, Union


class AlgebraError(Exception):
    """Raised for ill-formed parametric sets or operands outside an operator's domain."""


class General(Enum):
    STAR = "*"

    def __str__(self) -> str:
        return "*"

    def __repr__(self) -> str:
        return "*"


STAR = General.STAR

ParamValue = Union[str, General]


def canonical_token(value: Any) -> ParamValue:
    """
    Map a raw value to its canonical token.

    Numbers (and numeric strings) are rendered in a fixed decimal form so that
    `100`, `100.0` and `"100"` compare equal.
    """
    if value is STAR or (isinstance(value, str) and value.strip() == "*"):
        return STAR
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return _render_number(value)
    if isinstance(value, str):
        text = value.strip()
        if not text:
            raise AlgebraError("parameter values must be non-empty")
        try:
            number = float(text)
        except ValueError:
            return text
        return _render_number(number) if math.isfinite(number) else text
    raise AlgebraError(f"unsupported parameter value {value!r} ({type(value).__name__})")


def _render_number(number: float) -> str:
    if not math.isfinite(number):
        raise AlgebraError(f"non-finite parameter value {number!r}")
    if number.is_integer():
        return str(int(number))
    return repr(number)


@dataclass(frozen=True)
class ParamPair:
    param: str
    value: ParamValue

    def __post_init__(self) -> None:
        if not isinstance(self.param, str) or not self.param.strip():
            raise AlgebraError("parameter identifier must be non-empty")
        object.__setattr__(self, "param", self.param.strip())
        object.__setattr__(self, "value", canonical_token(self.value))

    @property
    def is_general(self) -> bool:
        return self.value is STAR

    def __str__(self) -> str:
        return f"{self.param}={self.value}"


@dataclass(frozen=True)
class ParamSet:
    """Immutable set of parameter/value pairs, one pair per identifier."""

    pairs: Tuple[ParamPair, ...] = ()
    _index: Dict[str, ParamValue] = field(
        default_factory=dict, init=False, repr=False, compare=False, hash=False
    )

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.pairs, key=lambda pair: pair.param))
        index: Dict[str, ParamValue] = {}
        for pair in ordered:
            if pair.param in index:
                raise AlgebraError(
                    f"parameter '{pair.param}' occurs more than once in one set"
                )
            index[pair.param] = pair.value
        object.__setattr__(self, "pairs", ordered)
        object.__setattr__(self, "_index", index)

    # Builders --------------------------------

    @classmethod
    def of(cls, values: Union[Mapping[str, Any], Iterable[ParamPair], None] = None) -> "ParamSet":
        if values is None:
            return EMPTY
        if isinstance(values, Mapping):
            return cls(tuple(ParamPair(str(k), v) for k, v in values.items()))
        return cls(tuple(values))

    def with_pairs(self, values: Mapping[str, Any]) -> "ParamSet":
        merged: Dict[str, Any] = dict(self._index)
        merged.update(values)
        return ParamSet.of(merged)

    # Access --------------------------------

    def params(self) -> Tuple[str, ...]:
        return tuple(self._index)

    def get(self, param: str) -> ParamValue:
        return self._index[param]

    def lookup(self, param: str) -> Union[ParamValue, None]:
        return self._index.get(param)

    def as_dict(self) -> Dict[str, ParamValue]:
        return dict(self._index)

    def to_json(self) -> Dict[str, str]:
        return {param: str(value) for param, value in self._index.items()}

    @property
    def is_general(self) -> bool:
        return any(value is STAR for value in self._index.values())

    def canonical(self) -> str:
        return "{" + ", ".join(str(pair) for pair in self.pairs) + "}"

    def __contains__(self, param: object) -> bool:
        return param in self._index

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[ParamPair]:
        return iter(self.pairs)

    def __bool__(self) -> bool:
        return bool(self.pairs)

    def __str__(self) -> str:
        return self.canonical()


EMPTY = ParamSet()
