"""Tests for the command-line entry point."""

import json

import pytest
import yaml

import app
from evaluation import build_qrels, write_qrels, write_run
from conftest import TINY_CONFIG, ranked


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "config.yaml"
    data = {**TINY_CONFIG, "paths": {"root": str(tmp_path / "artifacts")}}
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return str(path)


def _error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


class TestMain:
    def test_evaluate_prints_json(self, config_file, tmp_path, capsys, figure_passages, figure_keys):
        qrels = tmp_path / "qrels.txt"
        run = tmp_path / "run.trec"
        write_qrels(qrels, build_qrels(figure_passages, figure_keys))
        write_run(run, [ranked("q_bromley", ["p_bromley"]), ranked("q_qe2", ["p_misc", "p_qe2"])], "x")
        code = app.main(["evaluate", "--config", config_file, "--run", str(run), "--qrels", str(qrels), "--quiet"])
        assert code == 0
        result = json.loads(capsys.readouterr().out)
        assert result["metrics"]["MRR@10"] == 75.0
        assert result["skipped"] is False

    def test_missing_required_flag_is_a_usage_error(self, capsys):
        assert app.main(["train", "--kind", "ilf"]) == 2
        assert _error(capsys)["error"] == "UsageError"

    def test_unknown_command(self, capsys):
        assert app.main(["bogus"]) == 2
        assert "message" in _error(capsys)

    def test_bad_report_label(self, config_file, capsys):
        assert app.main(["report", "--config", config_file, "--run", "no-label", "--qrels", "q.txt"]) == 2
        assert "LABEL=PATH" in _error(capsys)["message"]

    def test_fuse_without_alpha_or_validation(self, config_file, capsys):
        code = app.main(["fuse", "--config", config_file, "--text-run", "a", "--image-run", "b", "--name", "c"])
        assert code == 2

    def test_missing_input_exits_one(self, config_file, tmp_path, capsys):
        code = app.main(["evaluate", "--config", config_file, "--run", str(tmp_path / "absent.trec"), "--qrels", "x"])
        assert code == 1
        assert _error(capsys)["error"] == "MissingInputError"

    def test_missing_config_exits_one(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("MICT_CONFIG", raising=False)
        assert app.main(["synth", "--config", str(tmp_path / "none.yaml")]) == 1
        assert _error(capsys)["error"] == "MissingInputError"

    def test_out_overrides_artifact_root(self, config_file, tmp_path, capsys):
        out = tmp_path / "elsewhere"
        assert app.main(["synth", "--config", config_file, "--out", str(out), "--quiet"]) == 0
        assert (out / "corpus" / "documents.jsonl").exists()
        assert json.loads(capsys.readouterr().out)["documents"] == 12
