"""
schema.py

Per-family parameter schemas.

The first insertion of a family (same entity kind and name) fixes its parameter
identifiers; later specs are padded from the recorded defaults so every set that
enters the algebra is congruent with its siblings.
"""

import logging
import threading
from typing import Dict, Optional, Tuple

from app.algebra.params import ParamSet, ParamValue
from app.holarchy.state import EntityKind, ResourceSpec

logger = logging.getLogger(__name__)


class SchemaError(Exception):
    """Raised when a spec cannot be normalized against its family schema."""


class SchemaRegistry:
    def __init__(self) -> None:
        self._schemas: Dict[Tuple[EntityKind, str], Dict[str, Optional[ParamValue]]] = {}
        self._lock = threading.Lock()

    def schema(self, kind: EntityKind, name: str) -> Optional[Dict[str, Optional[ParamValue]]]:
        with self._lock:
            found = self._schemas.get((kind, name))
            return dict(found) if found is not None else None

    def normalize(self, spec: ResourceSpec, record: bool = True) -> ResourceSpec:
        """Return `spec` with a full, concrete parameter set for its family."""
        if spec.name.strip() == "*":
            raise SchemaError("insert specs need a concrete name, '*' is not allowed")

        full = spec.defaults.with_pairs(spec.params.as_dict()) if spec.defaults else spec.params
        if full.is_general:
            raise SchemaError(f"insert specs must be concrete, got {spec.name}{full}")

        key = (spec.entity_kind, spec.name)
        with self._lock:
            schema = self._schemas.get(key)
            if schema is None:
                if record:
                    self._schemas[key] = {
                        param: spec.defaults.lookup(param) for param in full.params()
                    }
                    logger.debug("[SCHEMA] %s %s fixed to %s", key[0].value, key[1], list(full.params()))
                return _replace_params(spec, full)

        unknown = sorted(set(full.params()) - set(schema))
        if unknown:
            raise SchemaError(
                f"unknown parameter(s) {unknown} for {spec.name}; expected a subset of {sorted(schema)}"
            )

        padding: Dict[str, ParamValue] = {}
        for param, default in schema.items():
            if param in full:
                continue
            if default is None:
                raise SchemaError(f"{spec.name}: parameter '{param}' has no value and no default")
            padding[param] = default

        return _replace_params(spec, full.with_pairs(padding) if padding else full)


def _replace_params(spec: ResourceSpec, params: ParamSet) -> ResourceSpec:
    return ResourceSpec(
        entity_kind=spec.entity_kind,
        name=spec.name,
        params=params,
        type_chain=spec.type_chain,
        defaults=spec.defaults,
    )
