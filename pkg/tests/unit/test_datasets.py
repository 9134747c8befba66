import numpy as np
import pytest

from app.algebra.params import ParamSet
from app.ml import catalogue
from app.ml.datasets import (
    Dataset,
    DatasetKind,
    DatasetStore,
    IngestionError,
    generate_synthetic,
    load_dataset,
    write_csv,
)
from app.ml.registry import COMPATIBLE_DATA


def test_synthetic_data_is_reproducible():
    first = generate_synthetic("moons", n=100, dims=2, seed=4)
    second = generate_synthetic("moons", n=100, dims=2, seed=4)
    assert np.array_equal(first.features, second.features)
    assert np.array_equal(first.targets, second.targets)


def test_variants_share_structure_but_not_samples():
    train = generate_synthetic("regression", n=50, dims=3, seed=8, variant=0)
    test = generate_synthetic("regression", n=50, dims=3, seed=8, variant=1)
    assert not np.array_equal(train.features, test.features)
    assert train.task_kind is DatasetKind.REGRESSION


def test_unknown_generator():
    with pytest.raises(IngestionError):
        generate_synthetic("spirals", n=10, dims=2, seed=0)


def test_arrays_are_read_only():
    data = generate_synthetic("blobs", n=20, dims=2, seed=1, classes=2)
    with pytest.raises(ValueError):
        data.features[0, 0] = 1.0


def test_csv_written_and_loaded(tmp_path):
    data = generate_synthetic("blobs", n=12, dims=3, seed=3, classes=2)
    path = tmp_path / "blobs.csv"
    write_csv(data, path)
    loaded = load_dataset(path, "blobs", DatasetKind.CLASSIFICATION, target_column="target")
    assert np.allclose(loaded.features, data.features)
    assert list(loaded.targets) == list(data.targets)


def test_ragged_row_names_its_index(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,target\n1,2,0\n3,4\n", encoding="utf-8")
    with pytest.raises(IngestionError, match="row 2"):
        load_dataset(path, "bad", DatasetKind.CLASSIFICATION, target_column="target")


def test_non_numeric_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,x\n", encoding="utf-8")
    with pytest.raises(IngestionError, match="non-numeric"):
        load_dataset(path, "bad", DatasetKind.CLUSTERING)


def test_mismatched_targets():
    with pytest.raises(IngestionError):
        Dataset("d", DatasetKind.REGRESSION, np.zeros((3, 2)), np.zeros(2))


def test_store_keys_on_name_and_params():
    store = DatasetStore()
    data = generate_synthetic("blobs", n=10, dims=2, seed=0, classes=2, name="iris")
    store.put(ParamSet.of({"type": "train"}), data)
    assert store.get("iris", ParamSet.of({"type": "train"})) is data
    assert store.get("iris", ParamSet.of({"type": "test"})) is None


def test_catalogue_sizes():
    assert len(catalogue.algorithm_ids()) == 24
    assert len(catalogue.dataset_names()) == 9
    pairs = [
        (a, d)
        for a in catalogue.algorithm_ids()
        for d in catalogue.dataset_names()
        if catalogue.dataset_kind(d) in COMPATIBLE_DATA[catalogue.algorithm_entry(a).task]
    ]
    assert len(pairs) == 120


def test_catalogue_shapes():
    iris = catalogue.make_dataset("iris")
    assert (iris.n_samples, iris.n_features, iris.n_classes) == (150, 4, 3)
    moon = catalogue.make_dataset("art-moon", catalogue.TEST)
    assert (moon.n_samples, moon.n_features) == (500, 2)
    assert catalogue.dataset_spec("boston", catalogue.TEST).params == ParamSet.of({"type": "test"})
