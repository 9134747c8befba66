import json

import pytest

from app.frontend.render import Report, matrices, render, rows_csv
from app.frontend.validators import QueryValidationError, expanded_ids, parse_and_validate
from app.holarchy.queries import ResultRow, TestQuery, TrainingQuery
from app.holarchy.schema import SchemaRegistry
from app.ml.registry import build_registry


def query(**overrides) -> dict:
    base = {
        "id": "q",
        "task": "test",
        "lambda": [{"name": "*", "params": {"kernel": "rbf"}}],
        "delta": [{"name": "iris", "params": {"type": "test"}}],
        "output": {"measures": ["accuracy"]},
    }
    base.update(overrides)
    return base


def parse(raw):
    return parse_and_validate(raw, build_registry(), SchemaRegistry())


def diagnostics(raw) -> list:
    with pytest.raises(QueryValidationError) as e:
        parse(raw)
    return e.value.diagnostics


def row(algorithm: str, dataset: str, measure: str = "accuracy", value: float = 0.5, error=None) -> ResultRow:
    return ResultRow(
        query_id="q",
        algorithm_id="3",
        algorithm_name="SVC",
        algorithm_params="{kernel=rbf}",
        dataset_name=dataset,
        measure=measure,
        value=value,
        label=algorithm,
        error=error,
    )


# Validation --------------------------------


def test_test_query_becomes_one_operation():
    parsed = parse(query())
    assert parsed.task == "test"
    assert [op.query_id for op in parsed.operations] == ["q"]
    assert isinstance(parsed.operations[0], TestQuery)


def test_pairs_expand_with_suffixed_ids():
    parsed = parse(query(delta=[{"name": "iris"}, {"name": "wine"}, {"name": "*"}]))
    assert [op.query_id for op in parsed.operations] == ["q.1", "q.2", "q.3"]
    assert expanded_ids("q", 1) == ["q"]


def test_training_query_resolves_catalogue_ids():
    parsed = parse(query(task="train", **{"lambda": [{"name": "A03"}]}, delta=[{"name": "iris", "params": {"type": "train"}}]))
    operation = parsed.operations[0]
    assert isinstance(operation, TrainingQuery)
    assert operation.algorithm.name == "SVC"
    assert operation.algorithm.params.as_dict()["gamma"] == "0.001"


def test_malformed_json_points_at_the_root():
    problems = diagnostics('{"id": "q", ')
    assert problems[0].path == "$"
    assert "malformed JSON" in problems[0].message


def test_missing_fields_are_reported_by_path():
    problems = diagnostics({"id": "q", "delta": [{"name": "iris"}]})
    assert "$.lambda" in {p.path for p in problems}


def test_unknown_measure_rejected():
    problems = diagnostics(query(output={"measures": ["accuracy", "f1"]}))
    assert problems[0].path == "$.output.measures[1]"


def test_hold_only_for_training():
    problems = diagnostics(query(hold=True))
    assert problems[0].path == "$.hold"


def test_training_needs_concrete_specs():
    problems = diagnostics(query(task="train", **{"lambda": [{"name": "SVC", "params": {"kernel": "*"}}]}))
    paths = {p.path for p in problems}
    assert "$.lambda[0].params.kernel" in paths
    assert "$.delta[0].params.type" not in paths


def test_unknown_learner_and_parameter():
    problems = diagnostics(query(task="train", **{"lambda": [{"name": "SVR"}, {"name": "SVC", "params": {"depth": 3}}]}))
    assert {p.path for p in problems} == {"$.lambda[0].name", "$.lambda[1].params"}


def test_diagnostics_render_expectations():
    problem = diagnostics(query(output={"measures": ["f1"]}))[0]
    assert str(problem).startswith("$.output.measures[0]: unknown measure (expected one of")


# Rendering --------------------------------


def test_csv_has_header_and_rows():
    text = rows_csv([row("A01", "iris"), row("A03", "iris", value=0.25)])
    lines = text.splitlines()
    assert lines[0].startswith("query_id,algorithm_id,algorithm_name")
    assert len(lines) == 3


def test_matrix_skips_error_rows():
    grids = matrices([row("A01", "iris"), row("A01", "wine", value=0.75), row("A03", "iris", error="boom")])
    assert grids["accuracy"].splitlines() == ["algorithm,iris,wine", "A01,0.5,0.75"]


def test_render_writes_report_plots_and_warnings(tmp_path):
    report = Report(
        query_id="rbf",
        rows=[row("A03", "iris"), row("A05", "iris", value=0.9)],
        warnings=["nothing for wine"],
        format="plot",
        matrix=True,
    )
    written = render(report, tmp_path)
    names = sorted(p.relative_to(tmp_path / "rbf").as_posix() for p in written)
    assert names == ["matrix_accuracy.csv", "plots/iris_accuracy.svg", "report.csv", "report.json", "warnings.txt"]
    assert json.loads((tmp_path / "rbf" / "report.json").read_text())["query_id"] == "rbf"
    assert (tmp_path / "rbf" / "plots" / "iris_accuracy.svg").read_text().startswith("<svg")


def test_render_is_deterministic(tmp_path):
    report = Report(query_id="q", rows=[row("A01", "iris")], format="plot")
    first = [p.read_bytes() for p in render(report, tmp_path / "a")]
    second = [p.read_bytes() for p in render(report, tmp_path / "b")]
    assert first == second


def test_empty_report_writes_only_notes(tmp_path):
    written = render(Report(query_id="q", warnings=["no result exists"]), tmp_path)
    assert [p.name for p in written] == ["warnings.txt"]
