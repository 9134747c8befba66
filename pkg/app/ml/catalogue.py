"""
catalogue.py

The reference workload: sixteen algorithm families, the twenty-four algorithm
ids built from them and nine dataset shapes.

Family defaults keep only the parameters that tell variants apart. Each family
is served by one of the built-in learners, so metric values are approximate
while the routing structure is exact.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

from app.algebra.params import ParamSet
from app.holarchy.state import EntityKind, ResourceSpec
from app.ml.datasets import Dataset, DatasetKind, generate_synthetic
from app.ml.learners import (
    KMeans,
    KNearestNeighbors,
    Learner,
    LearnerTask,
    LinearRegression,
    NearestCentroid,
    RidgeRegression,
)
from app.ml.registry import (
    LearnerRegistry,
    LearnerSpec,
    param_bool,
    param_float,
    param_int,
    param_text,
)

logger = logging.getLogger(__name__)

TRAIN = "train"
TEST = "test"


# Families --------------------------------


def _svc(p: ParamSet, d: Dataset, seed: int) -> Learner:
    kernel = param_text(p, "kernel", "rbf")
    if kernel == "linear":
        return NearestCentroid("euclidean")
    if kernel == "sigmoid":
        return NearestCentroid("cityblock")
    return KNearestNeighbors(1 if param_float(p, "C", 1.0) >= 100 else 5)


def _clusters(p: ParamSet, d: Dataset, default: int) -> int:
    return param_int(p, "n_clusters", default)


FAMILIES: Dict[str, Tuple[LearnerTask, Dict[str, Any], Callable[[ParamSet, Dataset, int], Learner]]] = {
    "SVC": (
        LearnerTask.CLASSIFICATION,
        {"C": 1.0, "kernel": "rbf", "degree": 3, "gamma": "scale", "coef0": 0.0},
        _svc,
    ),
    "NuSVC": (
        LearnerTask.CLASSIFICATION,
        {"nu": 0.5, "kernel": "rbf", "degree": 3, "gamma": "scale", "coef0": 0.0},
        lambda p, d, s: KNearestNeighbors(5),
    ),
    "ComNB": (
        LearnerTask.CLASSIFICATION,
        {"alpha": 1.0, "fit_prior": True, "norm": False},
        lambda p, d, s: NearestCentroid("cityblock"),
    ),
    "DTree": (
        LearnerTask.CLASSIFICATION,
        {"criterion": "gini", "splitter": "best", "max_depth": None, "min_samples_split": 2},
        lambda p, d, s: KNearestNeighbors(1),
    ),
    "NrCent": (
        LearnerTask.CLASSIFICATION,
        {"metric": "euclidean", "shrink_threshold": None},
        lambda p, d, s: NearestCentroid(param_text(p, "metric", "euclidean")),
    ),
    "Linear": (
        LearnerTask.REGRESSION,
        {"fit_intercept": True, "normalize": False},
        lambda p, d, s: LinearRegression(param_bool(p, "fit_intercept", True)),
    ),
    "Ridge": (
        LearnerTask.REGRESSION,
        {"alpha": 1.0, "fit_intercept": True, "solver": "auto"},
        lambda p, d, s: RidgeRegression(param_float(p, "alpha", 1.0), param_bool(p, "fit_intercept", True)),
    ),
    "KRR": (
        LearnerTask.REGRESSION,
        {"alpha": 1.0, "kernel": "linear", "degree": 3, "coef0": 1},
        lambda p, d, s: RidgeRegression(param_float(p, "alpha", 1.0)),
    ),
    "Lasso": (
        LearnerTask.REGRESSION,
        {"alpha": 1.0, "fit_intercept": True, "max_iter": 1000},
        lambda p, d, s: RidgeRegression(param_float(p, "alpha", 1.0), param_bool(p, "fit_intercept", True)),
    ),
    "NuSVR": (
        LearnerTask.REGRESSION,
        {"nu": 0.5, "C": 1.0, "kernel": "rbf", "degree": 3, "gamma": "scale"},
        lambda p, d, s: RidgeRegression(param_float(p, "nu", 0.5) / param_float(p, "C", 1.0)),
    ),
    "ElasNet": (
        LearnerTask.REGRESSION,
        {"alpha": 1.0, "l1_ratio": 0.5, "fit_intercept": True},
        lambda p, d, s: RidgeRegression(param_float(p, "alpha", 1.0), param_bool(p, "fit_intercept", True)),
    ),
    "KMeans": (
        LearnerTask.CLUSTERING,
        {"n_clusters": 8, "init": "k-means++", "max_iter": 300, "algorithm": "auto"},
        lambda p, d, s: KMeans(_clusters(p, d, 8), param_int(p, "max_iter", 300), seed=s),
    ),
    "MBKMeans": (
        LearnerTask.CLUSTERING,
        {"n_clusters": 8, "max_iter": 100, "batch_size": 100},
        lambda p, d, s: KMeans(_clusters(p, d, 8), param_int(p, "max_iter", 100), seed=s + 1),
    ),
    "DBSCAN": (
        LearnerTask.CLUSTERING,
        {"eps": 0.5, "min_samples": 5, "metric": "euclidean"},
        lambda p, d, s: KMeans(d.n_classes or 2, seed=s),
    ),
    "Birch": (
        LearnerTask.CLUSTERING,
        {"threshold": 0.5, "branching_factor": 50, "n_clusters": 3},
        lambda p, d, s: KMeans(_clusters(p, d, 3), seed=s),
    ),
    "HAC": (
        LearnerTask.CLUSTERING,
        {"n_clusters": 2, "affinity": "euclidean", "linkage": "ward"},
        lambda p, d, s: KMeans(_clusters(p, d, 2), seed=s),
    ),
}


def register_families(registry: LearnerRegistry) -> None:
    for name, (task, defaults, factory) in FAMILIES.items():
        registry.register_learner(LearnerSpec(name, defaults, task), factory)


# Algorithm ids --------------------------------


@dataclass(frozen=True)
class CatalogueEntry:
    id: str
    family: str
    overrides: Mapping[str, Any]

    @property
    def task(self) -> LearnerTask:
        return FAMILIES[self.family][0]

    def spec(self) -> ResourceSpec:
        task, defaults, _ = FAMILIES[self.family]
        return ResourceSpec(
            entity_kind=EntityKind.ALGORITHM,
            name=self.family,
            params=ParamSet.of(self.overrides),
            type_chain=(task.value,),
            defaults=ParamSet.of(defaults),
        )

    def full_params(self) -> ParamSet:
        return ParamSet.of(FAMILIES[self.family][1]).with_pairs(self.overrides)


ALGORITHMS: Tuple[CatalogueEntry, ...] = (
    CatalogueEntry("A01", "SVC", {"kernel": "linear"}),
    CatalogueEntry("A02", "SVC", {"kernel": "sigmoid"}),
    CatalogueEntry("A03", "SVC", {"gamma": 0.001}),
    CatalogueEntry("A04", "SVC", {"C": 100, "gamma": 0.001}),
    CatalogueEntry("A05", "NuSVC", {}),
    CatalogueEntry("A06", "ComNB", {}),
    CatalogueEntry("A07", "DTree", {}),
    CatalogueEntry("A08", "NrCent", {}),
    CatalogueEntry("A09", "Linear", {}),
    CatalogueEntry("A10", "Ridge", {"fit_intercept": False}),
    CatalogueEntry("A11", "Ridge", {"alpha": 0.5}),
    CatalogueEntry("A12", "KRR", {}),
    CatalogueEntry("A13", "Lasso", {"alpha": 0.1}),
    CatalogueEntry("A14", "NuSVR", {}),
    CatalogueEntry("A15", "NuSVR", {"nu": 0.1}),
    CatalogueEntry("A16", "ElasNet", {}),
    CatalogueEntry("A17", "KMeans", {"n_clusters": "auto"}),
    CatalogueEntry("A18", "KMeans", {"algorithm": "full", "n_clusters": "auto"}),
    CatalogueEntry("A19", "MBKMeans", {"n_clusters": "auto"}),
    CatalogueEntry("A20", "DBSCAN", {}),
    CatalogueEntry("A21", "DBSCAN", {"metric": "cityblock"}),
    CatalogueEntry("A22", "DBSCAN", {"metric": "cosine"}),
    CatalogueEntry("A23", "Birch", {}),
    CatalogueEntry("A24", "HAC", {"n_clusters": "auto"}),
)

_BY_ID = {entry.id: entry for entry in ALGORITHMS}


def algorithm_entry(algorithm_id: str) -> CatalogueEntry:
    try:
        return _BY_ID[algorithm_id]
    except KeyError as e:
        raise KeyError(f"unknown catalogue id '{algorithm_id}' (A01..A24)") from e


def algorithm_ids(task: Optional[LearnerTask] = None) -> List[str]:
    return [entry.id for entry in ALGORITHMS if task is None or entry.task is task]


def label_index() -> Dict[Tuple[str, str], str]:
    """(family, canonical full parameter set) -> catalogue id, used for plot labels."""
    return {(entry.family, entry.full_params().canonical()): entry.id for entry in ALGORITHMS}


# Datasets --------------------------------


@dataclass(frozen=True)
class DatasetShape:
    name: str
    generator: str
    n: int
    dims: int
    classes: int
    seed: int

    @property
    def kind(self) -> DatasetKind:
        return DatasetKind.REGRESSION if self.generator == "regression" else DatasetKind.CLASSIFICATION


DATASETS: Tuple[DatasetShape, ...] = (
    DatasetShape("iris", "blobs", 150, 4, 3, 101),
    DatasetShape("wine", "blobs", 178, 13, 3, 102),
    DatasetShape("breast-cancer", "blobs", 569, 30, 2, 103),
    DatasetShape("digits", "blobs", 1797, 64, 10, 104),
    DatasetShape("art-class", "blobs", 900, 20, 3, 105),
    DatasetShape("art-moon", "moons", 500, 2, 2, 106),
    DatasetShape("boston", "regression", 506, 13, 0, 107),
    DatasetShape("diabetes", "regression", 442, 10, 0, 108),
    DatasetShape("art-regr", "regression", 200, 20, 0, 109),
)

_SHAPES = {shape.name: shape for shape in DATASETS}


def dataset_names(kind: Optional[DatasetKind] = None) -> List[str]:
    return [shape.name for shape in DATASETS if kind is None or shape.kind is kind]


def dataset_kind(name: str) -> DatasetKind:
    try:
        return _SHAPES[name].kind
    except KeyError as e:
        raise KeyError(f"unknown catalogue dataset '{name}'") from e


def dataset_spec(name: str, variant: str = TRAIN) -> ResourceSpec:
    shape = _SHAPES[name]
    return ResourceSpec(
        entity_kind=EntityKind.DATA,
        name=name,
        params=ParamSet.of({"type": variant}),
        type_chain=(shape.kind.value,),
    )


def make_dataset(name: str, variant: str = TRAIN, split: float = 0.6) -> Dataset:
    try:
        shape = _SHAPES[name]
    except KeyError as e:
        raise KeyError(f"unknown catalogue dataset '{name}'") from e
    return generate_synthetic(
        shape.generator,
        n=shape.n,
        dims=shape.dims,
        seed=shape.seed,
        classes=max(shape.classes, 2),
        noise=0.2 if shape.generator == "moons" else 0.1,
        name=name,
        variant=0 if variant == TRAIN else 1,
        split=split,
    )
