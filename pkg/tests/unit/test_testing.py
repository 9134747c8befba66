import random

from app.algebra.operators import leq
from app.algebra.params import ParamSet
from app.holarchy.queries import Criteria, OutputConfig, TestQuery, TrainingQuery
from app.holarchy.state import HolonKind
from app.ml.catalogue import TEST, algorithm_entry
from app.system import HolarchySystem

ALL_MEASURES = OutputConfig(measures=("accuracy", "mse", "fowlkes_mallows", "homogeneity"))

ALGORITHMS = ["A01", "A02", "A03", "A05", "A08", "A09", "A11", "A14", "A17", "A23"]
DATASETS = ["iris", "wine", "art-moon", "diabetes"]


def train(system: HolarchySystem, query_id: str, algorithm: str, dataset: str) -> str:
    spec, _ = system.load_catalogue_dataset(dataset)
    system.train(TrainingQuery(query_id, algorithm_entry(algorithm).spec(), spec, ALL_MEASURES))
    system.settle_now()
    return query_id


def run_test(system: HolarchySystem, query_id: str, algorithms: Criteria, data: Criteria, output=ALL_MEASURES):
    system.test(TestQuery(query_id, algorithms, data, output))
    system.settle_now()
    return system.outcome(query_id)


def small_workload(system: HolarchySystem) -> None:
    pairs = [("A01", "iris"), ("A03", "iris"), ("A05", "art-moon"), ("A14", "diabetes"), ("A17", "art-moon"), ("A08", "wine")]
    for k, (algorithm, dataset) in enumerate(pairs):
        train(system, f"t{k}", algorithm, dataset)
    for dataset in DATASETS:
        system.add_catalogue_dataset(dataset, TEST)
        system.settle_now()


# Queries --------------------------------


def test_kernel_query_keeps_only_matching_models(system):
    small_workload(system)
    outcome = run_test(system, "rbf", Criteria("*", ParamSet.of({"kernel": "rbf"})), Criteria("*", ParamSet.of({"type": "test"})))
    assert {row.label for row in outcome.rows} == {"A03", "A05", "A14"}
    assert not outcome.errors


def test_moon_query_reports_applicable_measures_only(system):
    small_workload(system)
    outcome = run_test(system, "moon", Criteria(), Criteria("art-moon", ParamSet.of({"type": "test"})))
    assert {row.measure for row in outcome.rows} == {"accuracy", "fowlkes_mallows", "homogeneity"}
    assert {row.dataset_name for row in outcome.rows} == {"art-moon"}


def test_family_query_over_one_dataset(system):
    small_workload(system)
    outcome = run_test(system, "svc", Criteria("SVC"), Criteria("iris", ParamSet.of({"type": "test"})), OutputConfig(measures=("accuracy",)))
    assert sorted(row.label for row in outcome.rows) == ["A01", "A03"]
    assert all(0.0 <= row.value <= 1.0 for row in outcome.rows)


def test_no_match_is_a_warning_not_an_error(system):
    small_workload(system)
    outcome = run_test(system, "none", Criteria("Ridge"), Criteria("*"))
    assert outcome.rows == []
    assert outcome.errors == []
    assert any("no result exists" in warning for warning in outcome.warnings)


def test_unknown_dataset_resolves_to_nothing(system):
    small_workload(system)
    outcome = run_test(system, "nodata", Criteria(), Criteria("digits"))
    assert outcome.rows == []
    assert any("no dataset matches" in warning for warning in outcome.warnings)


def test_refused_fetch_becomes_an_error_row(system, mocker):
    small_workload(system)
    holons = system.holons()
    iris_test = next(
        h for h in holons.values()
        if h.state.kind is HolonKind.DATA and h.state.name == "iris" and h.state.capability == ParamSet.of({"type": "test"})
    )
    mocker.patch.dict(iris_test.kb, {"deny_access": True})
    outcome = run_test(system, "denied", Criteria("SVC"), Criteria("iris", ParamSet.of({"type": "test"})))
    assert outcome.errors
    assert all("refused access" in row.error for row in outcome.rows)


def test_test_query_leaves_structure_untouched(system):
    small_workload(system)
    before = system.snapshot()
    run_test(system, "all", Criteria(), Criteria())
    assert system.snapshot() == before


# Oracle --------------------------------


def expected_pairs(system: HolarchySystem, algorithms: Criteria, data: Criteria) -> set:
    name_ok = lambda wanted, name: leq(ParamSet.of({"name": wanted}), ParamSet.of({"name": name}))  # noqa: E731
    holons = system.holons().values()
    datasets = [
        h.state for h in holons
        if h.state.kind is HolonKind.DATA and h.state.is_atomic()
        and name_ok(data.name, h.state.name) and leq(data.params, h.state.capability)
    ]
    pairs = set()
    for model in (h for h in holons if h.state.kind is HolonKind.MODEL and h.kb.get("fitted") is not None):
        if not (name_ok(algorithms.name, model.state.name) and leq(algorithms.params, model.state.capability)):
            continue
        for dataset in datasets:
            if dataset.name == model.kb["dataset_name"]:
                pairs.add((model.id, dataset.id))
    return pairs


def random_criteria(rng: random.Random):
    algorithms = Criteria(
        rng.choice(["*", "*", "SVC", "NuSVC", "KMeans", "Ridge", "NuSVR", "NrCent"]),
        ParamSet.of(rng.choice([{}, {}, {"kernel": "rbf"}, {"kernel": "*"}, {"kernel": "linear"}, {"n_clusters": "auto"}, {"alpha": 0.5}])),
    )
    data = Criteria(
        rng.choice(["*", "*"] + DATASETS),
        ParamSet.of(rng.choice([{}, {"type": "test"}, {"type": "train"}, {"type": "*"}])),
    )
    return algorithms, data


def test_results_match_the_oracle(config):
    rng = random.Random(42)
    for h in range(200):
        holarchy = HolarchySystem(config)
        try:
            for k in range(rng.randint(1, 5)):
                train(holarchy, f"t{h}-{k}", rng.choice(ALGORITHMS), rng.choice(DATASETS))
            for dataset in rng.sample(DATASETS, 2):
                holarchy.add_catalogue_dataset(dataset, TEST)
                holarchy.settle_now()
            for q in range(50):
                algorithms, data = random_criteria(rng)
                outcome = run_test(holarchy, f"q{h}-{q}", algorithms, data)
                found = {(row.model_id, row.dataset_holon) for row in outcome.rows if row.error is None}
                assert found == expected_pairs(holarchy, algorithms, data), (algorithms, data)
        finally:
            holarchy.close()
