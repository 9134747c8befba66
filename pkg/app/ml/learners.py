"""
learners.py

Built-in numpy learners.

All learners are deterministic given their inputs and seed. Linear models are
solved through explicit factorizations (QR for least squares, Cholesky for
ridge) which is plenty at the sizes the platform works with.
"""

import logging
from abc import ABC, abstractmethod
from enum import Enum
from typing import Dict, List, Optional

import numpy as np

logger = logging.getLogger(__name__)


class LearnerError(Exception):
    """Raised for incompatible task kinds, degenerate data or unknown learners."""


class LearnerTask(str, Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"
    CLUSTERING = "clustering"


def squared_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared euclidean distances, rows of `a` against rows of `b`."""
    d = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d, 0.0)


def cityblock_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.abs(a[:, None, :] - b[None, :, :]).sum(axis=2)


class Learner(ABC):
    task: LearnerTask

    @abstractmethod
    def fit(self, features: np.ndarray, targets: Optional[np.ndarray]) -> "Learner": ...

    @abstractmethod
    def predict(self, features: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def state(self) -> Dict[str, np.ndarray]:
        """Fitted arrays, used to check reproducibility."""


# Classification --------------------------------


class NearestCentroid(Learner):
    task = LearnerTask.CLASSIFICATION

    def __init__(self, metric: str = "euclidean") -> None:
        if metric not in ("euclidean", "cityblock"):
            raise LearnerError(f"nearest-centroid supports euclidean or cityblock, got '{metric}'")
        self.metric = metric
        self.classes_: Optional[np.ndarray] = None
        self.centroids_: Optional[np.ndarray] = None

    def fit(self, features, targets):
        if targets is None:
            raise LearnerError("nearest-centroid needs class labels")
        self.classes_ = np.unique(targets)
        self.centroids_ = np.vstack([features[targets == c].mean(axis=0) for c in self.classes_])
        return self

    def predict(self, features):
        if self.metric == "cityblock":
            distances = cityblock_distances(features, self.centroids_)
        else:
            distances = squared_distances(features, self.centroids_)
        return self.classes_[np.argmin(distances, axis=1)]

    def state(self):
        return {"classes": self.classes_, "centroids": self.centroids_}


class KNearestNeighbors(Learner):
    task = LearnerTask.CLASSIFICATION

    def __init__(self, n_neighbors: int = 5) -> None:
        if n_neighbors < 1:
            raise LearnerError(f"k-nn needs n_neighbors >= 1, got {n_neighbors}")
        self.n_neighbors = n_neighbors
        self._features: Optional[np.ndarray] = None
        self._targets: Optional[np.ndarray] = None

    def fit(self, features, targets):
        if targets is None:
            raise LearnerError("k-nn needs class labels")
        self._features = np.array(features)
        self._targets = np.array(targets)
        return self

    def predict(self, features):
        k = min(self.n_neighbors, self._features.shape[0])
        distances = squared_distances(features, self._features)
        # stable sort keeps ties in training order
        nearest = np.argsort(distances, axis=1, kind="stable")[:, :k]
        votes = self._targets[nearest]
        classes = np.unique(self._targets)
        counts = (votes[:, :, None] == classes[None, None, :]).sum(axis=1)
        return classes[np.argmax(counts, axis=1)]

    def state(self):
        return {"features": self._features, "targets": self._targets}


# Regression --------------------------------


def _with_intercept(features: np.ndarray) -> np.ndarray:
    return np.hstack([features, np.ones((features.shape[0], 1))])


class LinearRegression(Learner):
    task = LearnerTask.REGRESSION

    def __init__(self, fit_intercept: bool = True) -> None:
        self.fit_intercept = fit_intercept
        self.coef_: Optional[np.ndarray] = None
        self.intercept_ = 0.0

    def fit(self, features, targets):
        if targets is None:
            raise LearnerError("linear regression needs targets")
        design = _with_intercept(features) if self.fit_intercept else features
        if design.shape[0] < design.shape[1]:
            solution = np.linalg.lstsq(design, targets, rcond=None)[0]
        else:
            q, r = np.linalg.qr(design)
            if np.min(np.abs(np.diag(r))) < 1e-12:
                solution = np.linalg.lstsq(design, targets, rcond=None)[0]
            else:
                solution = np.linalg.solve(r, q.T @ targets)
        if self.fit_intercept:
            self.coef_, self.intercept_ = solution[:-1], float(solution[-1])
        else:
            self.coef_ = solution
        return self

    def predict(self, features):
        return features @ self.coef_ + self.intercept_

    def state(self):
        return {"coef": self.coef_, "intercept": np.array([self.intercept_])}


class RidgeRegression(Learner):
    task = LearnerTask.REGRESSION

    def __init__(self, alpha: float = 1.0, fit_intercept: bool = True) -> None:
        if alpha < 0:
            raise LearnerError(f"ridge penalty must be >= 0, got {alpha}")
        self.alpha = alpha
        self.fit_intercept = fit_intercept
        self.coef_: Optional[np.ndarray] = None
        self.intercept_ = 0.0

    def fit(self, features, targets):
        if targets is None:
            raise LearnerError("ridge regression needs targets")
        x = np.asarray(features, dtype=float)
        y = np.asarray(targets, dtype=float)
        if self.fit_intercept:
            x_mean, y_mean = x.mean(axis=0), y.mean()
            x, y = x - x_mean, y - y_mean
        gram = x.T @ x + self.alpha * np.eye(x.shape[1])
        try:
            lower = np.linalg.cholesky(gram)
            self.coef_ = np.linalg.solve(lower.T, np.linalg.solve(lower, x.T @ y))
        except np.linalg.LinAlgError:
            logger.debug("[RIDGE] singular normal equations, using least squares")
            self.coef_ = np.linalg.lstsq(x, y, rcond=None)[0]
        self.intercept_ = float(y_mean - x_mean @ self.coef_) if self.fit_intercept else 0.0
        return self

    def predict(self, features):
        return features @ self.coef_ + self.intercept_

    def state(self):
        return {"coef": self.coef_, "intercept": np.array([self.intercept_])}


# Clustering --------------------------------


class KMeans(Learner):
    """Lloyd iterations from a seeded choice of distinct samples."""

    task = LearnerTask.CLUSTERING

    def __init__(self, n_clusters: int = 8, max_iter: int = 300, seed: int = 0, tol: float = 1e-10) -> None:
        if n_clusters < 1:
            raise LearnerError(f"k-means needs n_clusters >= 1, got {n_clusters}")
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.seed = seed
        self.tol = tol
        self.centroids_: Optional[np.ndarray] = None
        self.objective_history: List[float] = []

    def fit(self, features, targets=None):
        x = np.asarray(features, dtype=float)
        if self.n_clusters > x.shape[0]:
            raise LearnerError(f"k-means with k={self.n_clusters} on only {x.shape[0]} samples")

        rng = np.random.default_rng(self.seed)
        centroids = x[rng.choice(x.shape[0], size=self.n_clusters, replace=False)].copy()
        self.objective_history = []

        for _ in range(self.max_iter):
            distances = squared_distances(x, centroids)
            labels = np.argmin(distances, axis=1)
            objective = float(distances[np.arange(x.shape[0]), labels].sum())
            self._record(objective)

            updated = centroids.copy()
            for k in range(self.n_clusters):
                members = x[labels == k]
                if members.size:  # empty clusters keep their centroid
                    updated[k] = members.mean(axis=0)
            if np.allclose(updated, centroids, atol=self.tol, rtol=0.0):
                centroids = updated
                break
            centroids = updated

        distances = squared_distances(x, centroids)
        self._record(float(distances.min(axis=1).sum()))
        self.centroids_ = centroids
        return self

    def _record(self, objective: float) -> None:
        if self.objective_history:
            previous = self.objective_history[-1]
            if objective > previous + 1e-9 * max(1.0, abs(previous)):
                raise LearnerError(f"k-means objective increased from {previous} to {objective}")
        self.objective_history.append(objective)

    def predict(self, features):
        return np.argmin(squared_distances(np.asarray(features, dtype=float), self.centroids_), axis=1)

    def state(self):
        return {"centroids": self.centroids_}
