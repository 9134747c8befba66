from app.holarchy.inspect import holon_count
from app.holarchy.queries import OutputConfig, TrainingQuery
from app.holarchy.state import ALG_ID, HolonKind
from app.ml import catalogue
from app.ml.catalogue import algorithm_entry
from app.ml.learners import LearnerError


def training(system, query_id: str, algorithm: str = "A01", dataset: str = "iris", hold: bool = False) -> TrainingQuery:
    spec, _ = system.load_catalogue_dataset(dataset)
    return TrainingQuery(query_id, algorithm_entry(algorithm).spec(), spec, OutputConfig(measures=("accuracy",)), hold=hold)


def test_training_creates_one_model_and_reports_train_rows(system):
    system.train(training(system, "t1"))
    system.settle_now()

    outcome = system.outcome("t1")
    assert outcome.done and not outcome.errors
    assert [row.measure for row in outcome.rows] == ["accuracy"]
    assert outcome.rows[0].phase == "train"
    assert outcome.rows[0].label == "A01"
    assert 0.0 <= outcome.rows[0].value <= 1.0
    assert holon_count(system.holons(), HolonKind.MODEL) == 1
    assert system.validate().ok


def test_model_joins_both_supers(system):
    system.train(training(system, "t1"))
    system.settle_now()
    model = next(h.state for h in system.holons().values() if h.state.kind is HolonKind.MODEL)
    algorithm, data = model.supers
    holons = system.holons()
    assert holons[algorithm].state.kind is HolonKind.ALGORITHM
    assert holons[data].state.kind is HolonKind.DATA
    assert model.id in holons[data].state.model_subs


def test_duplicate_training_reports_recorded_results(system):
    system.train(training(system, "t1"))
    system.settle_now()
    first = system.outcome("t1").rows

    system.train(training(system, "t2"))
    system.settle_now()

    outcome = system.outcome("t2")
    assert any("already trained" in warning for warning in outcome.warnings)
    assert [row.value for row in outcome.rows] == [row.value for row in first]
    assert {row.query_id for row in outcome.rows} == {"t2"}
    assert holon_count(system.holons(), HolonKind.MODEL) == 1


def test_training_failure_becomes_an_error_row(system, mocker):
    mocker.patch.object(system.registry, "fit", side_effect=LearnerError("boom"))
    system.train(training(system, "t1"))
    system.settle_now()

    outcome = system.outcome("t1")
    assert outcome.done
    assert outcome.errors == ["boom"]
    assert outcome.rows[0].error == "boom"


def test_failed_model_is_retrained_on_repeat(system, mocker):
    mocker.patch.object(system.registry, "fit", side_effect=LearnerError("boom"))
    system.train(training(system, "t1"))
    system.settle_now()
    mocker.stopall()

    system.train(training(system, "t2"))
    system.settle_now()
    outcome = system.outcome("t2")
    assert not outcome.errors
    assert [row.measure for row in outcome.rows] == ["accuracy"]
    assert holon_count(system.holons(), HolonKind.MODEL) == 1


def test_refused_access_fails_the_training(system):
    query_id = system.add_catalogue_dataset("iris")
    system.settle_now()
    holon = system.outcome(query_id).holon
    system.runtime.get(holon).kb["deny_access"] = True

    system.train(training(system, "t1"))
    system.settle_now()
    outcome = system.outcome("t1")
    assert any("refused access" in error for error in outcome.errors)


def test_held_training_waits_for_release(system):
    system.train(training(system, "t1", hold=True))
    system.settle_now()
    assert not system.outcome("t1").done
    assert system.outcome("t1").rows == []

    system.release("t1")
    system.settle_now()
    outcome = system.outcome("t1")
    assert outcome.done
    assert [row.measure for row in outcome.rows] == ["accuracy"]


def test_unknown_dataset_needs_resource_info(system):
    spec = system.normalize(catalogue.dataset_spec("wine"))
    system.train(TrainingQuery("t1", algorithm_entry("A01").spec(), spec, OutputConfig()))
    system.settle_now()
    outcome = system.outcome("t1")
    assert outcome.done
    assert any("missing resource info" in error for error in outcome.errors)


def test_incompatible_pair_reports_an_error(system):
    system.train(training(system, "t1", algorithm="A09", dataset="iris"))
    system.settle_now()
    outcome = system.outcome("t1")
    assert outcome.errors
    assert all(row.error for row in outcome.rows)


def test_new_intermediate_takes_over_the_address_entries(system):
    system.add_algorithm("A01", query_id="add-a01")
    system.settle_now()
    leaf = system.outcome("add-a01").holon
    system.train(training(system, "q1", dataset="iris", hold=True))
    system.train(training(system, "q2", dataset="wine", hold=True))
    system.settle_now()

    holons = system.holons()
    root = holons[ALG_ID].state
    models = {q: holons[leaf].state.address_book[q] for q in ("q1", "q2")}
    assert {q: root.address_book[q] for q in ("q1", "q2")} == {"q1": leaf, "q2": leaf}
    assert {holons[m].state.kind for m in models.values()} == {HolonKind.MODEL}

    system.add_algorithm("A02", query_id="add-a02")
    system.settle_now()
    holons = system.holons()
    middle = holons[leaf].state.super
    assert middle != ALG_ID
    assert {q: root.address_book[q] for q in ("q1", "q2")} == {"q1": middle, "q2": middle}
    assert {q: holons[middle].state.address_book[q] for q in ("q1", "q2")} == {"q1": leaf, "q2": leaf}
    assert {q: holons[leaf].state.address_book[q] for q in ("q1", "q2")} == models
    assert system.address_chain(ALG_ID, "q1") == [ALG_ID, middle, leaf, models["q1"]]
    assert root.moved == {}

    system.train(training(system, "q3", dataset="breast-cancer", hold=True))
    system.settle_now()
    chain = system.address_chain(ALG_ID, "q3")
    assert chain[:3] == [ALG_ID, middle, leaf]
    assert system.holons()[chain[3]].state.kind is HolonKind.MODEL

    for query_id in ("q1", "q2", "q3"):
        system.release(query_id)
    system.settle_now()
    for query_id in ("q1", "q2", "q3"):
        outcome = system.outcome(query_id)
        assert outcome.done and not outcome.errors
    assert system.validate().ok
