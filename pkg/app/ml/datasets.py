"""
datasets.py

Dataset values, CSV ingestion and seeded synthetic generators.

Responsibilities:
- Hold feature matrices and optional targets as read-only numpy arrays
- Load header + numeric CSV files, reporting the offending row on failure
- Generate blobs, two-moons and linear-regression data deterministically
- Keep the datasets a session knows about, keyed by name and parameter set
"""

import csv
import logging
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.algebra.params import ParamSet

logger = logging.getLogger(__name__)


class IngestionError(Exception):
    """Raised when a dataset file cannot be turned into a numeric matrix."""


class DatasetKind(str, Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"
    CLUSTERING = "clustering-capable"


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    task_kind: DatasetKind
    features: np.ndarray
    targets: Optional[np.ndarray] = None
    split: float = 0.6
    provenance: str = ""

    def __post_init__(self) -> None:
        features = np.array(self.features, dtype=float)
        if features.ndim != 2:
            raise IngestionError(f"{self.name}: features must be a matrix")
        targets = None
        if self.targets is not None:
            targets = np.array(self.targets)
            if targets.shape[0] != features.shape[0]:
                raise IngestionError(
                    f"{self.name}: {features.shape[0]} feature rows but {targets.shape[0]} targets"
                )
            targets.setflags(write=False)
        if not 0 < self.split <= 1:
            raise IngestionError(f"{self.name}: train fraction {self.split} outside (0, 1]")
        features.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)

    @property
    def n_samples(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    @property
    def n_classes(self) -> Optional[int]:
        if self.task_kind is DatasetKind.CLASSIFICATION and self.targets is not None:
            return int(np.unique(self.targets).size)
        return None

    def split_indices(self, seed: int) -> Tuple[np.ndarray, np.ndarray]:
        """Shuffled (train, eval) index arrays; eval falls back to train for tiny sets."""
        order = np.random.default_rng(seed).permutation(self.n_samples)
        cut = max(1, int(round(self.split * self.n_samples)))
        train, evaluation = order[:cut], order[cut:]
        if evaluation.size == 0:
            evaluation = train
        return train, evaluation

    def __str__(self) -> str:
        return f"<dataset {self.name} {self.n_samples}x{self.n_features}>"


# Ingestion --------------------------------


def load_dataset(
    path: Path,
    name: str,
    task_kind: DatasetKind,
    target_column: Optional[str] = None,
    normalize: bool = False,
    split: float = 0.6,
) -> Dataset:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
    except OSError as e:
        raise IngestionError(f"cannot read {path}: {e}") from e

    if not rows:
        raise IngestionError(f"{path}: missing header row")
    header = [column.strip() for column in rows[0]]
    if target_column is not None and target_column not in header:
        raise IngestionError(f"{path}: target column '{target_column}' not in header {header}")

    values: List[List[float]] = []
    for index, row in enumerate(rows[1:], start=1):
        if not row:
            continue
        if len(row) != len(header):
            raise IngestionError(f"{path}: row {index} has {len(row)} cells, header has {len(header)}")
        try:
            values.append([float(cell) for cell in row])
        except ValueError as e:
            raise IngestionError(f"{path}: row {index} has a non-numeric cell ({e})") from e

    if not values:
        raise IngestionError(f"{path}: no data rows")
    matrix = np.array(values, dtype=float)

    targets = None
    if target_column is not None:
        column = header.index(target_column)
        targets = matrix[:, column]
        matrix = np.delete(matrix, column, axis=1)
        if task_kind is DatasetKind.CLASSIFICATION:
            if not np.all(np.equal(np.mod(targets, 1), 0)):
                raise IngestionError(f"{path}: classification targets must be integral")
            targets = targets.astype(np.int64)

    if normalize:
        matrix = normalize_unit(matrix)

    logger.info("[DATA] loaded %s from %s (%d x %d)", name, path, matrix.shape[0], matrix.shape[1])
    return Dataset(name, task_kind, matrix, targets, split, provenance=f"csv:{path}")


def write_csv(dataset: Dataset, path: Path, target_column: str = "target") -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        header = [f"x{i}" for i in range(dataset.n_features)]
        if dataset.targets is not None:
            header.append(target_column)
        writer.writerow(header)
        for i in range(dataset.n_samples):
            row = [repr(float(v)) for v in dataset.features[i]]
            if dataset.targets is not None:
                row.append(repr(dataset.targets[i].item()))
            writer.writerow(row)


def normalize_unit(matrix: np.ndarray) -> np.ndarray:
    """Scale every column into [0, 1]; constant columns become 0."""
    low = matrix.min(axis=0)
    span = matrix.max(axis=0) - low
    span[span == 0] = 1.0
    return (matrix - low) / span


# Synthetic generators --------------------------------


def generate_synthetic(
    kind: str,
    n: int,
    dims: int,
    seed: int,
    classes: int = 3,
    noise: float = 0.1,
    name: Optional[str] = None,
    variant: int = 0,
    split: float = 0.6,
    normalize: bool = True,
) -> Dataset:
    """
    Deterministic dataset for (kind, n, dims, seed, variant).

    The seed fixes the underlying structure (centres, weights); `variant` draws a
    fresh sample from it, which is how same-named test datasets are produced.
    """
    if n <= 0 or dims <= 0:
        raise IngestionError(f"synthetic datasets need n > 0 and dims > 0 (got n={n}, dims={dims})")
    structure = np.random.default_rng(seed)
    sample = np.random.default_rng([seed, variant])

    if kind == "blobs":
        centres = structure.uniform(-10.0, 10.0, size=(classes, dims))
        labels = sample.permutation(np.arange(n) % classes)
        features = centres[labels] + sample.normal(scale=1.0 + 10.0 * noise, size=(n, dims))
        dataset_kind, targets = DatasetKind.CLASSIFICATION, labels.astype(np.int64)
    elif kind == "moons":
        if dims != 2:
            raise IngestionError("the two-moons generator is planar (dims=2)")
        labels = sample.permutation(np.arange(n) % 2)
        angle = sample.uniform(0.0, np.pi, size=n)
        outer = np.column_stack([np.cos(angle), np.sin(angle)])
        inner = np.column_stack([1.0 - np.cos(angle), 0.5 - np.sin(angle)])
        features = np.where(labels[:, None] == 0, outer, inner) + sample.normal(scale=noise, size=(n, 2))
        dataset_kind, targets = DatasetKind.CLASSIFICATION, labels.astype(np.int64)
    elif kind == "regression":
        weights = structure.normal(size=dims)
        bias = structure.normal()
        features = sample.normal(size=(n, dims))
        targets = features @ weights + bias + noise * sample.normal(size=n)
        dataset_kind = DatasetKind.REGRESSION
    else:
        raise IngestionError(f"unknown synthetic generator '{kind}' (expected blobs, moons, regression)")

    if normalize:
        features = normalize_unit(features)
    return Dataset(
        name=name or f"{kind}-{seed}",
        task_kind=dataset_kind,
        features=features,
        targets=targets,
        split=split,
        provenance=f"synthetic:{kind}(n={n}, dims={dims}, seed={seed}, variant={variant})",
    )


class DatasetStore:
    """Datasets available to the PRS, keyed by (name, canonical parameter set)."""

    def __init__(self) -> None:
        self._items: Dict[Tuple[str, str], Dataset] = {}
        self._lock = threading.Lock()

    def put(self, params: ParamSet, dataset: Dataset) -> None:
        with self._lock:
            self._items[(dataset.name, params.canonical())] = dataset

    def get(self, name: str, params: ParamSet) -> Optional[Dataset]:
        with self._lock:
            return self._items.get((name, params.canonical()))

    def keys(self) -> List[Tuple[str, str]]:
        with self._lock:
            return sorted(self._items)
