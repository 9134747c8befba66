"""
registry.py

Learner plugins: specs, factories, fitting and evaluation.

Responsibilities:
- Map learner names (as used in algorithm specs) to a factory and a schema
- Resolve reserved parameter values (n_clusters=auto) against the training data
- Fit on the train split and report train measures on the evaluation split
- Evaluate fitted models, silently skipping measures the task cannot produce
"""

import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from app.algebra.params import ParamSet
from app.ml.datasets import Dataset, DatasetKind
from app.ml.learners import (
    KMeans,
    KNearestNeighbors,
    Learner,
    LearnerError,
    LearnerTask,
    LinearRegression,
    NearestCentroid,
    RidgeRegression,
)
from app.ml.metrics import METRICS

logger = logging.getLogger(__name__)

AUTO = "auto"

MEASURES_BY_TASK: Dict[LearnerTask, Tuple[str, ...]] = {
    LearnerTask.CLASSIFICATION: ("accuracy",),
    LearnerTask.REGRESSION: ("mse",),
    LearnerTask.CLUSTERING: ("fowlkes_mallows", "homogeneity"),
}

COMPATIBLE_DATA: Dict[LearnerTask, Tuple[DatasetKind, ...]] = {
    LearnerTask.CLASSIFICATION: (DatasetKind.CLASSIFICATION,),
    LearnerTask.REGRESSION: (DatasetKind.REGRESSION,),
    LearnerTask.CLUSTERING: (DatasetKind.CLASSIFICATION, DatasetKind.CLUSTERING),
}


class RegistrationError(Exception):
    """Raised when a learner name is registered twice."""


class EvaluationError(Exception):
    """Raised when a dataset does not fit the model's feature space."""


LearnerFactory = Callable[[ParamSet, Dataset, int], Learner]


@dataclass(frozen=True)
class LearnerSpec:
    name: str
    defaults: Mapping[str, Any]
    task: LearnerTask
    measures: Tuple[str, ...] = ()
    description: str = ""

    @property
    def applicable_measures(self) -> Tuple[str, ...]:
        return self.measures or MEASURES_BY_TASK[self.task]

    def schema(self) -> ParamSet:
        return ParamSet.of(self.defaults)


@dataclass(frozen=True, eq=False)
class FittedModel:
    learner: str
    params: ParamSet
    dataset_name: str
    seed: int
    task: LearnerTask
    estimator: Learner
    n_features: int
    measures: Tuple[str, ...] = field(default=())


@dataclass(frozen=True)
class Measurement:
    measure: str
    value: float
    elapsed: float


# Parameter helpers --------------------------------


def param_float(params: ParamSet, name: str, default: float) -> float:
    raw = params.lookup(name)
    if raw is None or str(raw) in ("none", "scale", AUTO):
        return default
    try:
        return float(str(raw))
    except ValueError as e:
        raise LearnerError(f"parameter {name}={raw} is not a number") from e


def param_int(params: ParamSet, name: str, default: int) -> int:
    return int(param_float(params, name, default))


def param_bool(params: ParamSet, name: str, default: bool) -> bool:
    raw = params.lookup(name)
    if raw is None:
        return default
    return str(raw) == "true"


def param_text(params: ParamSet, name: str, default: str) -> str:
    raw = params.lookup(name)
    return default if raw is None else str(raw)


# Registry --------------------------------


class LearnerRegistry:
    """Written during bootstrap, read-only afterwards."""

    def __init__(self) -> None:
        self._specs: Dict[str, LearnerSpec] = {}
        self._factories: Dict[str, LearnerFactory] = {}
        self._lock = threading.Lock()

    def register_learner(self, spec: LearnerSpec, factory: LearnerFactory) -> None:
        with self._lock:
            if spec.name in self._specs:
                raise RegistrationError(f"learner '{spec.name}' is already registered")
            self._specs[spec.name] = spec
            self._factories[spec.name] = factory
        logger.debug("[REGISTRY] registered learner %s (%s)", spec.name, spec.task.value)

    def get(self, name: str) -> LearnerSpec:
        try:
            return self._specs[name]
        except KeyError as e:
            raise LearnerError(f"unknown learner '{name}'; known: {', '.join(sorted(self._specs))}") from e

    def __contains__(self, name: object) -> bool:
        return name in self._specs

    def names(self) -> List[str]:
        return sorted(self._specs)

    def snapshot(self) -> List[Dict[str, Any]]:
        return [
            {"name": s.name, "task": s.task.value, "defaults": dict(s.defaults), "measures": list(s.applicable_measures)}
            for s in (self._specs[n] for n in self.names())
        ]

    # Fitting --------------------------------

    def resolve_params(self, spec: LearnerSpec, params: ParamSet, data: Dataset) -> ParamSet:
        if params.lookup("n_clusters") is None or str(params.get("n_clusters")) != AUTO:
            return params
        classes = data.n_classes
        if classes is None:
            raise LearnerError(f"{spec.name}: n_clusters=auto needs a labelled dataset, {data.name} has none")
        return params.with_pairs({"n_clusters": classes})

    def fit(
        self,
        name: str,
        params: ParamSet,
        data: Dataset,
        seed: int,
        measures: Sequence[str] = (),
        clock: Optional[Callable[[], float]] = None,
    ) -> Tuple[FittedModel, List[Measurement]]:
        spec = self.get(name)
        if data.task_kind not in COMPATIBLE_DATA[spec.task]:
            raise LearnerError(f"{name} ({spec.task.value}) cannot train on {data.name} ({data.task_kind.value})")
        resolved = self.resolve_params(spec, params, data)
        clock = clock or _wall_clock

        if spec.task is LearnerTask.CLUSTERING:
            train_idx = eval_idx = np.arange(data.n_samples)
        else:
            train_idx, eval_idx = data.split_indices(seed)
        targets = data.targets[train_idx] if data.targets is not None else None

        started = clock()
        try:
            estimator = self._factories[name](resolved, data, seed)
            estimator.fit(data.features[train_idx], targets)
        except LearnerError:
            raise
        except (ValueError, np.linalg.LinAlgError) as e:
            raise LearnerError(f"{name} failed on {data.name}: {e}") from e
        fit_elapsed = clock() - started

        model = FittedModel(
            learner=name,
            params=resolved,
            dataset_name=data.name,
            seed=seed,
            task=spec.task,
            estimator=estimator,
            n_features=data.n_features,
            measures=spec.applicable_measures,
        )
        rows = self._measure(model, data, eval_idx, measures, fit_elapsed, clock)
        logger.info("[REGISTRY] fitted %s%s on %s", name, resolved, data.name)
        return model, rows

    def evaluate(
        self,
        model: FittedModel,
        data: Dataset,
        measures: Sequence[str],
        clock: Optional[Callable[[], float]] = None,
    ) -> List[Measurement]:
        return self._measure(model, data, np.arange(data.n_samples), measures, 0.0, clock or _wall_clock)

    def _measure(
        self,
        model: FittedModel,
        data: Dataset,
        indices: np.ndarray,
        measures: Sequence[str],
        base_elapsed: float,
        clock: Callable[[], float],
    ) -> List[Measurement]:
        if data.n_features != model.n_features:
            raise EvaluationError(
                f"{model.learner} was fitted on {model.n_features} features, {data.name} has {data.n_features}"
            )
        wanted = [m for m in measures if m in model.measures]
        if not wanted or data.targets is None:
            return []

        started = clock()
        predicted = model.estimator.predict(data.features[indices])
        truth = data.targets[indices]
        values = [(m, METRICS[m](truth, predicted)) for m in wanted]
        elapsed = base_elapsed + (clock() - started)
        return [Measurement(m, float(v), float(elapsed)) for m, v in values]


def _wall_clock() -> float:
    return time.perf_counter()


# Built-ins --------------------------------

BUILTIN_SPECS: Tuple[Tuple[LearnerSpec, LearnerFactory], ...] = (
    (
        LearnerSpec("nearest-centroid", {"metric": "euclidean"}, LearnerTask.CLASSIFICATION),
        lambda p, d, s: NearestCentroid(param_text(p, "metric", "euclidean")),
    ),
    (
        LearnerSpec("k-nn", {"n_neighbors": 5}, LearnerTask.CLASSIFICATION),
        lambda p, d, s: KNearestNeighbors(param_int(p, "n_neighbors", 5)),
    ),
    (
        LearnerSpec("linear", {"fit_intercept": True}, LearnerTask.REGRESSION),
        lambda p, d, s: LinearRegression(param_bool(p, "fit_intercept", True)),
    ),
    (
        LearnerSpec("ridge", {"alpha": 1.0, "fit_intercept": True}, LearnerTask.REGRESSION),
        lambda p, d, s: RidgeRegression(param_float(p, "alpha", 1.0), param_bool(p, "fit_intercept", True)),
    ),
    (
        LearnerSpec("k-means", {"n_clusters": 8, "max_iter": 300}, LearnerTask.CLUSTERING),
        lambda p, d, s: KMeans(param_int(p, "n_clusters", 8), param_int(p, "max_iter", 300), seed=s),
    ),
)


def build_registry(include_catalogue: bool = True) -> LearnerRegistry:
    registry = LearnerRegistry()
    for spec, factory in BUILTIN_SPECS:
        registry.register_learner(spec, factory)
    if include_catalogue:
        from app.ml.catalogue import register_families

        register_families(registry)
    return registry
