import pytest

from app import workflow
from app.state import QueryState

TRAIN = {
    "id": "svc-iris",
    "task": "train",
    "lambda": [{"name": "A01"}, {"name": "A03"}],
    "delta": [{"name": "iris", "params": {"type": "train"}}],
    "output": {"measures": ["accuracy"]},
}

TEST = {
    "id": "svc-test",
    "task": "test",
    "lambda": [{"name": "SVC"}],
    "delta": [{"name": "iris", "params": {"type": "test"}}],
    "output": {"measures": ["accuracy"], "matrix": True},
}


@pytest.fixture
def loaded(system):
    system.load_catalogue_dataset("iris")
    system.add_catalogue_dataset("iris", "test")
    system.settle_now()
    return system


def test_route_start_resumes_parsed_queries():
    assert workflow.route_start(QueryState()) == "VALIDATE"
    assert workflow.route_start(QueryState(step="TEST")) == "VALIDATE"
    assert workflow.route_start(QueryState(step="TEST", parsed=object())) == "TEST"


@pytest.mark.asyncio
async def test_training_then_testing(loaded, tmp_path):
    trained = await workflow.run_query(loaded, TRAIN, tmp_path)
    assert trained.exit_code == 0
    assert trained.operation_ids == ["svc-iris.1", "svc-iris.2"]
    assert {row.label for row in trained.report.rows} == {"A01", "A03"}
    assert (tmp_path / "svc-iris" / "report.csv").exists()

    tested = await workflow.run_query(loaded, TEST, tmp_path)
    assert tested.exit_code == 0
    assert {(row.label, row.phase) for row in tested.report.rows} == {("A01", "test"), ("A03", "test")}
    assert (tmp_path / "svc-test" / "matrix_accuracy.csv").exists()


@pytest.mark.asyncio
async def test_operations_settle_one_at_a_time(loaded, tmp_path, mocker):
    settle = mocker.spy(loaded, "settle")
    await workflow.run_query(loaded, TRAIN, tmp_path)
    assert settle.call_count == 2


@pytest.mark.asyncio
async def test_invalid_query_is_rejected(loaded, tmp_path):
    state = await workflow.run_query(loaded, {**TEST, "output": {"measures": ["f1"]}}, tmp_path)
    assert state.step == "END"
    assert state.exit_code == 3
    assert state.diagnostics and state.diagnostics[0].startswith("$.output.measures[0]")
    assert not (tmp_path / "svc-test").exists()


@pytest.mark.asyncio
async def test_query_without_any_result_fails(system, tmp_path):
    query = {**TRAIN, "lambda": [{"name": "A01"}]}
    state = await workflow.run_query(system, query, tmp_path)
    assert state.exit_code == 1
    assert any("missing resource info" in error for error in state.report.errors)


@pytest.mark.asyncio
async def test_crashing_node_maps_to_failure(loaded, tmp_path, mocker):
    mocker.patch.object(loaded, "submit_one", side_effect=RuntimeError("boom"))
    state = await workflow.run_query(loaded, TEST, tmp_path)
    assert state.exit_code == 1
