"""CLI flows: artifact lifecycle, exit codes, output contracts."""

import json
import pathlib

import pytest
from click.testing import CliRunner

from pvrag.cli import main

FIXTURE = pathlib.Path(__file__).resolve().parents[1] / "fixtures" / "mini_sider.tsv"


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def workspace(tmp_path):
    """Config file pointing all artifacts into a scratch data dir."""
    data_dir = tmp_path / "data"
    config = tmp_path / "pvrag.conf"
    config.write_text(f"data_dir = {data_dir}\n", encoding="utf-8")
    return config, data_dir


def invoke(runner, config, *args):
    return runner.invoke(main, ["--config", str(config), *args], catch_exceptions=False)


def combined_output(result):
    out = result.output
    try:
        out += result.stderr
    except ValueError:
        pass  # output not separated on this click version
    return out


@pytest.fixture()
def ingested(runner, workspace):
    config, data_dir = workspace
    result = invoke(runner, config, "ingest", "--input", str(FIXTURE))
    assert result.exit_code == 0, result.output
    return config, data_dir


def test_ingest_reports_counts(runner, workspace):
    config, data_dir = workspace
    result = invoke(runner, config, "ingest", "--input", str(FIXTURE))
    assert result.exit_code == 0
    assert "1381 associations, 70 drugs, 69 side-effect terms" in result.output
    assert (data_dir / "kb.json").exists()


def test_ingest_flag_conflicts_are_usage_errors(runner, workspace):
    config, _ = workspace
    result = runner.invoke(
        main,
        ["--config", str(config), "ingest", "--input", str(FIXTURE), "--sider-se", str(FIXTURE)],
    )
    assert result.exit_code == 2
    result = runner.invoke(main, ["--config", str(config), "ingest"])
    assert result.exit_code == 2


def test_corpus_writes_one_line_per_chunk(runner, ingested):
    config, data_dir = ingested
    result = invoke(runner, config, "corpus", "--format", "B")
    assert result.exit_code == 0
    assert "1381 format-B chunks" in result.output
    lines = (data_dir / "corpus_b.txt").read_text().splitlines()
    assert len(lines) == 1381
    result = invoke(runner, config, "corpus", "--format", "a")
    assert "70 format-A chunks" in result.output


def test_graph_export(runner, ingested):
    config, data_dir = ingested
    result = invoke(runner, config, "graph")
    assert result.exit_code == 0
    assert "139 nodes, 1381 edges" in result.output
    assert (data_dir / "graph.jsonl").exists()
    assert (data_dir / "graph.cypher").exists()


def test_index_then_query_rag_b(runner, ingested):
    config, data_dir = ingested
    result = invoke(runner, config, "index", "--format", "B")
    assert result.exit_code == 0, result.output
    assert (data_dir / "index_b.jsonl").exists()
    result = invoke(
        runner, config, "query", "--pipeline", "rag_b",
        "Is headache an adverse effect of metformin?",
    )
    assert result.exit_code == 0, result.output
    assert result.output.splitlines()[0] == "YES"


def test_query_graphrag_matches_oracle(runner, ingested):
    config, _ = ingested
    invoke(runner, config, "graph")
    yes = invoke(
        runner, config, "query", "--pipeline", "graphrag",
        "Is headache an adverse effect of metformin?",
    )
    assert yes.exit_code == 0
    assert yes.output.splitlines()[0] == "YES"
    no = invoke(
        runner, config, "query", "--pipeline", "graphrag",
        "Is ulcer an adverse effect of aspirin?",
    )
    assert no.exit_code == 0
    assert no.output.splitlines()[0] == "NO"


def test_query_verbose_shows_evidence(runner, ingested):
    config, _ = ingested
    result = invoke(
        runner, config, "query", "--pipeline", "graphrag", "--verbose",
        "Is headache an adverse effect of metformin?",
    )
    assert "assertion: Metformin is known to be associated" in result.output
    assert "evidence:" in result.output


def test_query_without_ingest_fails_cleanly(runner, workspace):
    config, _ = workspace
    result = runner.invoke(
        main,
        ["--config", str(config), "query", "--pipeline", "graphrag", "Is x an adverse effect of y?"],
    )
    assert result.exit_code == 1
    assert "knowledge base not found" in combined_output(result)


def test_query_entity_error_exit_code(runner, ingested):
    config, _ = ingested
    result = runner.invoke(
        main,
        [
            "--config", str(config), "query", "--pipeline", "graphrag",
            "Is headache an adverse effect of vorplastin?",
        ],
    )
    assert result.exit_code == 1
    assert "drug_not_found" in combined_output(result)


def test_usage_errors_exit_2(runner, ingested):
    config, _ = ingested
    assert runner.invoke(main, ["--config", str(config), "query", "--pipeline", "rag_c", "q"]).exit_code == 2
    assert runner.invoke(main, ["--config", str(config), "corpus"]).exit_code == 2
    assert runner.invoke(main, ["--config", str(config), "nonsense"]).exit_code == 2


def test_sample_dataset_deterministic(runner, ingested):
    config, data_dir = ingested
    first = invoke(runner, config, "sample-dataset", "--seed", "3")
    assert first.exit_code == 0
    assert "67 drugs, 1340 pairs" in first.output
    path = data_dir / "dataset_seed3.jsonl"
    bytes_one = path.read_bytes()
    header = json.loads(bytes_one.splitlines()[0])
    assert header["seed"] == 3
    invoke(runner, config, "sample-dataset", "--seed", "3")
    assert path.read_bytes() == bytes_one


def test_evaluate_prints_markdown_and_writes_json(runner, ingested):
    config, data_dir = ingested
    result = invoke(
        runner, config, "evaluate", "--pipeline", "graphrag",
        "--backend", "deterministic", "--seed", "42",
    )
    assert result.exit_code == 0, result.output
    assert "GraphRAG | 1.0000 | 1.0000 | 1.0000 | 1.0000 | 1.0000" in result.output
    json_path = data_dir / "report_graphrag.json"
    report = json.loads(json_path.read_text())
    assert report["pipeline"] == "graphrag"
    assert report["seed"] == 42
    assert report["matrix"] == {"tp": 670, "tn": 670, "fp": 0, "fn": 0}

    first_bytes = json_path.read_bytes()
    again = invoke(
        runner, config, "evaluate", "--pipeline", "graphrag",
        "--backend", "deterministic", "--seed", "42",
    )
    assert again.exit_code == 0
    assert json_path.read_bytes() == first_bytes


def test_evaluate_accepts_prebuilt_dataset(runner, ingested, tmp_path):
    config, _ = ingested
    ds_path = tmp_path / "ds.jsonl"
    invoke(runner, config, "sample-dataset", "--seed", "5", "--out", str(ds_path))
    result = invoke(
        runner, config, "evaluate", "--pipeline", "graphrag", "--dataset", str(ds_path),
    )
    assert result.exit_code == 0
    assert "| GraphRAG |" in result.output


def test_bad_config_key_is_operational_error(runner, tmp_path):
    config = tmp_path / "bad.conf"
    config.write_text("frobnicate = yes\n")
    result = runner.invoke(main, ["--config", str(config), "graph"])
    assert result.exit_code == 1
    assert "unknown config key" in combined_output(result)


def test_inline_credentials_rejected(runner, tmp_path):
    config = tmp_path / "leaky.conf"
    config.write_text("api_key = sk-123\n")
    result = runner.invoke(main, ["--config", str(config), "graph"])
    assert result.exit_code == 1
    assert "inline credential" in combined_output(result)
