import json
from pathlib import Path

import pytest

from app import main as cli

SCENARIOS = Path(__file__).resolve().parents[2] / "scenarios"


@pytest.fixture
def out(tmp_path) -> Path:
    return tmp_path / "out"


def run(out: Path, *argv: str) -> int:
    return cli.main(["--out", str(out), "--log-level", "WARNING", *argv])


def write(path: Path, payload) -> Path:
    path.write_text(payload if isinstance(payload, str) else json.dumps(payload), encoding="utf-8")
    return path


def test_bootstrap_prints_the_three_roots(out, capsys):
    assert run(out, "bootstrap") == cli.EXIT_OK
    snapshot = json.loads(capsys.readouterr().out)
    assert set(snapshot) == {"ALG", "DATA", "SYS"}


def test_invalid_similarity_factors_are_a_config_error(out):
    assert run(out, "--alpha", "0.05", "--beta", "0.1", "bootstrap") == cli.EXIT_CONFIG


def test_bad_log_level_is_a_config_error(out):
    assert cli.main(["--log-level", "LOUD", "bootstrap"]) == cli.EXIT_CONFIG


def test_run_fig6(out):
    assert run(out, "run", str(SCENARIOS / "fig6.json")) == cli.EXIT_OK
    assert (out / "snapshots" / "fig6.json").exists()


def test_malformed_query_exits_3(out, tmp_path, capsys):
    query = write(tmp_path / "q.json", '{"id": "q", ')
    assert run(out, "query", str(query)) == cli.EXIT_INVALID
    assert "malformed JSON" in capsys.readouterr().err


def test_query_after_scenario_replay(out, tmp_path, capsys):
    query = write(
        tmp_path / "q.json",
        {
            "id": "a01-test",
            "lambda": [{"name": "A01"}],
            "delta": [{"name": "iris", "params": {"type": "train"}}],
            "output": {"measures": ["accuracy"]},
        },
    )
    assert run(out, "query", str(query), "--scenario", str(SCENARIOS / "fig7.json")) == cli.EXIT_OK
    assert "report.csv" in capsys.readouterr().out


def test_failing_assert_exits_4(out, tmp_path):
    scenario = write(
        tmp_path / "s.json",
        {"name": "s", "steps": [{"op": "assert", "check": "holons", "kind": "model", "count": 1}]},
    )
    assert run(out, "run", str(scenario)) == cli.EXIT_ASSERT


def test_malformed_scenario_is_a_config_error(out, tmp_path):
    scenario = write(tmp_path / "s.json", {"name": "s", "steps": [{"op": "explode"}]})
    assert run(out, "run", str(scenario)) == cli.EXIT_CONFIG


def test_scenario_with_bad_factors_is_a_config_error(out, tmp_path):
    scenario = write(tmp_path / "s.json", {"name": "s", "alpha": 0.1, "beta": 0.3, "steps": []})
    assert run(out, "run", str(scenario)) == cli.EXIT_CONFIG


def test_add_alg_from_resource_file(out, tmp_path, capsys):
    spec = write(tmp_path / "svc.json", {"kind": "algorithm", "name": "SVC", "params": {"kernel": "rbf"}})
    assert run(out, "add-alg", str(spec)) == cli.EXIT_OK
    assert "SVC -> " in capsys.readouterr().out


def test_add_data_rejects_algorithm_files(out, tmp_path):
    spec = write(tmp_path / "svc.json", {"kind": "algorithm", "name": "SVC"})
    assert run(out, "add-data", str(spec)) == cli.EXIT_CONFIG


def test_export_dot_to_file(out, tmp_path):
    target = tmp_path / "fig6.dot"
    code = run(out, "export", "--no-models", "--scenario", str(SCENARIOS / "fig6.json"), "--output", str(target))
    assert code == cli.EXIT_OK
    assert target.read_text(encoding="utf-8") == (SCENARIOS / "fixtures" / "fig6.dot").read_text(encoding="utf-8")


def test_cli_flags_override_the_scenario(out, tmp_path, mocker):
    scenario = write(tmp_path / "s.json", {"name": "s", "seed": 3, "steps": []})
    build = mocker.spy(cli, "HolarchySystem")
    assert run(out, "--seed", "11", "run", str(scenario)) == cli.EXIT_OK
    assert build.call_args.args[0].SEED == 11
