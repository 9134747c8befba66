import itertools
import random
from pathlib import Path

import pytest

from app.algebra.params import ParamSet
from app.frontend.schemas import ResourceFile
from app.holarchy import construction
from app.holarchy.inspect import holon_count
from app.holarchy.queries import OutputConfig, TrainingQuery
from app.holarchy.schema import SchemaError
from app.holarchy.state import ALG_ID, DATA_ID, HolonKind
from app.ml.catalogue import TEST, TRAIN, algorithm_entry
from app.system import HolarchySystem, add_resource_file

SCENARIOS = Path(__file__).resolve().parents[2] / "scenarios"

REFERENCE_ADDS = [
    ("X", {"p1": "a", "p2": "b", "p3": "c", "p4": "d"}),
    ("Y", {"q1": "o", "q2": "p", "q3": "q"}),
    ("X", {"p1": "a", "p2": "e", "p3": "c", "p4": "d"}),
    ("X", {"p1": "a", "p2": "e", "p3": "c", "p4": "f"}),
    ("Y", {"q1": "o", "q2": "p", "q3": "s"}),
    ("Z", {"r1": "u", "r2": "v"}),
]


def add_all(system: HolarchySystem, specs) -> list:
    ids = []
    for name, params in specs:
        ids.append(system.add_algorithm(name, params))
        system.settle_now()
    return ids


def leaf_keys(system: HolarchySystem) -> list:
    return sorted(
        f"{h.state.name}{h.state.capability}"
        for h in system.holons().values()
        if h.state.kind is HolonKind.ALGORITHM and h.state.is_atomic()
    )


def test_reference_adds_match_the_dot_fixture(system):
    add_all(system, REFERENCE_ADDS)
    expected = (SCENARIOS / "fixtures" / "fig6.dot").read_text(encoding="utf-8")
    assert system.export_dot(include_models=False) == expected
    assert system.validate().ok


def test_intermediate_similarity_of_one_changed_literal(system, mocker):
    spy = mocker.spy(construction, "similarity")
    add_all(system, REFERENCE_ADDS[:3])
    assert 0.775 in spy.spy_return_list


def test_intermediate_takes_the_sum_and_the_leaf_level(system):
    add_all(system, REFERENCE_ADDS[:3])
    holons = system.holons()
    middle = holons["3"].state
    assert middle.capability == ParamSet.of({"p1": "a", "p2": "*", "p3": "c", "p4": "d"})
    assert middle.level == 2
    assert holons["1"].state.level == 3
    assert holons["1"].state.supers == ["3"]
    assert holons["ALG"].state.subs == {"2", "3"}


def test_duplicate_add_is_reported_not_inserted(system):
    add_all(system, REFERENCE_ADDS)
    before = len(system.holons())
    query_id = system.add_algorithm("X", {"p1": "a", "p2": "b", "p3": "c", "p4": "d"})
    system.settle_now()
    outcome = system.outcome(query_id)
    assert outcome.holon == "1"
    assert any("already present" in warning for warning in outcome.warnings)
    assert len(system.holons()) == before


def test_strict_cfp_builds_the_same_holarchy(config):
    strict = HolarchySystem(config.model_copy(update={"STRICT_CFP": True}))
    try:
        add_all(strict, REFERENCE_ADDS)
        expected = (SCENARIOS / "fixtures" / "fig6.dot").read_text(encoding="utf-8")
        assert strict.export_dot(include_models=False) == expected
    finally:
        strict.close()


def test_unknown_parameter_for_known_family_fails(system):
    add_all(system, REFERENCE_ADDS[:1])
    with pytest.raises(SchemaError):
        system.add_algorithm("X", {"p1": "a", "p9": "z"})


@pytest.mark.parametrize("seed", [0])
def test_no_duplicate_leaves_over_random_sequences(config, seed):
    rng = random.Random(seed)
    for _ in range(1000):
        holarchy = HolarchySystem(config)
        try:
            specs = []
            for _ in range(rng.randint(1, 8)):
                family = rng.choice(["X", "Y"])
                size = 3 if family == "X" else 2
                specs.append((family, {f"{family.lower()}{i}": rng.choice("ab") for i in range(size)}))
            add_all(holarchy, specs)
            distinct = sorted({f"{name}{ParamSet.of(params)}" for name, params in specs})
            assert leaf_keys(holarchy) == distinct
            assert holarchy.validate().ok
        finally:
            holarchy.close()


def test_algorithm_file_defaults_pad_later_members(system):
    first = ResourceFile(
        kind="algorithm", name="Foo", type_chain=["custom"], params={"a": "x", "b": "y"}, defaults={"a": "x", "b": "y"}
    )
    add_resource_file(system, first, query_id="foo-1")
    system.settle_now()
    add_resource_file(system, ResourceFile(kind="algorithm", name="Foo", params={"a": "z"}), query_id="foo-2")
    system.settle_now()

    outcome = system.outcome("foo-2")
    assert outcome.done and not outcome.errors
    holons = system.holons()
    assert holons[outcome.holon].state.capability == ParamSet.of({"a": "z", "b": "y"})
    assert holons[system.outcome("foo-1").holon].state.type_chain == ("custom",)
    assert leaf_keys(system) == ["Foo{a=x, b=y}", "Foo{a=z, b=y}"]


# Overlapping inserts --------------------------------

PAIRS = list(itertools.product(["A01", "A02", "A03"], [("iris", TRAIN), ("iris", TEST), ("wine", TRAIN)]))


def submit_unsettled(holarchy: HolarchySystem) -> list:
    ids = []
    for i, (algorithm, (dataset, variant)) in enumerate(PAIRS):
        spec, _ = holarchy.load_catalogue_dataset(dataset, variant)
        query = TrainingQuery(f"t{i}", algorithm_entry(algorithm).spec(), spec, OutputConfig(measures=("accuracy",)))
        ids.append(holarchy.train(query))
    return ids


def assert_one_leaf_per_spec(holarchy: HolarchySystem, ids: list) -> None:
    holons = holarchy.holons()
    for kind in (HolonKind.ALGORITHM, HolonKind.DATA):
        leaves = [h.state for h in holons.values() if h.state.kind is kind and h.state.is_atomic()]
        assert len(leaves) == 3
        assert len({(leaf.name, leaf.capability) for leaf in leaves}) == 3
    assert holon_count(holons, HolonKind.MODEL) == len(PAIRS)
    for query_id in ids:
        outcome = holarchy.outcome(query_id)
        assert outcome.done and not outcome.errors, outcome.errors
    report = holarchy.validate()
    assert report.ok, str(report)
    assert holarchy.runtime.get(ALG_ID).families == {}
    assert holarchy.runtime.get(DATA_ID).families == {}
    assert all(not h.state.moved for h in holons.values())


def test_overlapping_trainings_keep_one_leaf_per_spec(system):
    ids = submit_unsettled(system)
    system.settle_now()
    assert_one_leaf_per_spec(system, ids)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_overlapping_trainings_under_other_schedules(config, seed):
    holarchy = HolarchySystem(config.model_copy(update={"SEED": seed}))
    try:
        ids = submit_unsettled(holarchy)
        holarchy.settle_now()
        assert_one_leaf_per_spec(holarchy, ids)
    finally:
        holarchy.close()


@pytest.mark.asyncio
async def test_overlapping_trainings_in_concurrent_mode(config):
    holarchy = HolarchySystem(config.model_copy(update={"DETERMINISTIC": False}))
    try:
        ids = submit_unsettled(holarchy)
        await holarchy.settle()
        assert_one_leaf_per_spec(holarchy, ids)
    finally:
        holarchy.close()


def test_overlapping_adds_of_one_family(system):
    for name, params in REFERENCE_ADDS + REFERENCE_ADDS[:2]:
        system.add_algorithm(name, params)
    system.settle_now()
    distinct = sorted({f"{name}{ParamSet.of(params)}" for name, params in REFERENCE_ADDS})
    assert leaf_keys(system) == distinct
    assert system.validate().ok


def test_pushed_down_data_leaf_keeps_model_levels(system):
    system.train(TrainingQuery("t1", algorithm_entry("A01").spec(), system.load_catalogue_dataset("iris")[0], OutputConfig()))
    system.settle_now()
    test_spec, _ = system.load_catalogue_dataset("iris", TEST)
    system.add(test_spec)
    system.settle_now()

    holons = system.holons()
    model = next(h.state for h in holons.values() if h.state.kind is HolonKind.MODEL)
    algorithm, data = model.supers
    assert holons[data].state.level == 3
    assert model.level == holons[algorithm].state.level + 1
    assert system.validate().ok
