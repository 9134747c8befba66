import numpy as np
import pytest

from app.algebra.params import ParamSet
from app.ml.datasets import Dataset, DatasetKind, generate_synthetic
from app.ml.learners import KMeans, KNearestNeighbors, LearnerError, LinearRegression, NearestCentroid, RidgeRegression
from app.ml.registry import (
    EvaluationError,
    LearnerSpec,
    LearnerTask,
    RegistrationError,
    build_registry,
)


def toy_classes() -> Dataset:
    features = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [5.0, 5.0], [5.1, 5.0], [5.0, 5.1]])
    return Dataset("toy", DatasetKind.CLASSIFICATION, features, np.array([0, 0, 0, 1, 1, 1]), split=1.0)


# Learners --------------------------------


def test_linear_regression_recovers_weights():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(50, 3))
    y = x @ np.array([1.5, -2.0, 0.5]) + 4.0
    model = LinearRegression().fit(x, y)
    assert np.allclose(model.coef_, [1.5, -2.0, 0.5])
    assert model.intercept_ == pytest.approx(4.0)


def test_ridge_without_penalty_matches_least_squares():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(40, 2))
    y = x @ np.array([3.0, 1.0]) - 1.0
    model = RidgeRegression(alpha=0.0).fit(x, y)
    assert np.allclose(model.predict(x), y)


def test_nearest_centroid_and_knn_separate_toy_classes():
    data = toy_classes()
    for learner in (NearestCentroid(), NearestCentroid("cityblock"), KNearestNeighbors(1)):
        learner.fit(data.features, data.targets)
        assert list(learner.predict(data.features)) == list(data.targets)


def test_exact_linear_data_has_zero_error():
    x = np.random.default_rng(2).normal(size=(10, 2))
    y = x @ np.array([2.0, -1.0]) + 0.5
    predicted = LinearRegression().fit(x, y).predict(x)
    assert float(np.mean((predicted - y) ** 2)) < 1e-9


def test_kmeans_objective_never_increases():
    data = generate_synthetic("blobs", n=200, dims=4, seed=5, classes=3)
    for seed in range(100):
        history = KMeans(3, seed=seed).fit(data.features).objective_history
        assert all(later <= earlier + 1e-9 for earlier, later in zip(history, history[1:]))


def test_kmeans_is_reproducible():
    data = generate_synthetic("blobs", n=120, dims=3, seed=9, classes=3)
    first = KMeans(3, seed=4).fit(data.features)
    second = KMeans(3, seed=4).fit(data.features)
    assert np.array_equal(first.state()["centroids"], second.state()["centroids"])


def test_invalid_hyperparameters():
    with pytest.raises(LearnerError):
        NearestCentroid("cosine")
    with pytest.raises(LearnerError):
        KNearestNeighbors(0)
    with pytest.raises(LearnerError):
        KMeans(10).fit(np.zeros((3, 2)))


# Registry --------------------------------


def test_registry_rejects_duplicate_names():
    registry = build_registry(include_catalogue=False)
    with pytest.raises(RegistrationError):
        registry.register_learner(LearnerSpec("k-nn", {}, LearnerTask.CLASSIFICATION), lambda p, d, s: KNearestNeighbors())


def test_fit_reports_requested_measures_only():
    registry = build_registry()
    model, rows = registry.fit("nearest-centroid", ParamSet.of({"metric": "euclidean"}), toy_classes(), 0, ("accuracy", "mse"))
    assert [row.measure for row in rows] == ["accuracy"]
    assert rows[0].value == 1.0
    assert model.n_features == 2


def test_fit_rejects_incompatible_data():
    registry = build_registry()
    with pytest.raises(LearnerError):
        registry.fit("linear", ParamSet.of({"fit_intercept": True}), toy_classes(), 0)


def test_unknown_learner():
    with pytest.raises(LearnerError):
        build_registry().get("SVR")


def test_auto_clusters_follow_class_count():
    registry = build_registry()
    data = generate_synthetic("blobs", n=90, dims=2, seed=2, classes=3)
    model, _ = registry.fit("KMeans", ParamSet.of({"n_clusters": "auto"}), data, 0)
    assert model.params.get("n_clusters") == "3"


def test_evaluate_rejects_other_feature_space():
    registry = build_registry()
    model, _ = registry.fit("k-nn", ParamSet.of({"n_neighbors": 1}), toy_classes(), 0)
    wide = Dataset("wide", DatasetKind.CLASSIFICATION, np.zeros((4, 3)), np.array([0, 1, 0, 1]))
    with pytest.raises(EvaluationError):
        registry.evaluate(model, wide, ("accuracy",))


def test_fit_with_step_clock_is_deterministic():
    registry = build_registry()
    ticks = iter(range(100))
    _, rows = registry.fit("k-nn", ParamSet.of({"n_neighbors": 1}), toy_classes(), 0, ("accuracy",), lambda: float(next(ticks)))
    assert rows[0].elapsed == 2.0
