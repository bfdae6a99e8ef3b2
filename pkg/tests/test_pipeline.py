"""Tests for the cached pipeline steps behind the CLI."""

import json

import pytest

from config import MissingInputError, load_config
from evaluation import build_qrels, read_qrels, read_run, write_qrels, write_run
from services import Pipeline
from services.artifacts import cached_step, meta_path
from conftest import ranked


@pytest.fixture
def pipeline(tiny_config):
    return Pipeline(tiny_config, threads=1, progress=False)


class TestCachedStep:
    def test_skips_when_fresh(self, tmp_path):
        source = tmp_path / "in.txt"
        source.write_text("a")
        output = tmp_path / "out" / "result.txt"
        calls = []

        def produce():
            calls.append(1)
            output.write_text(source.read_text().upper())
            return {"length": 1}

        first = cached_step("copy", "h", [source], [output], produce)
        second = cached_step("copy", "h", [source], [output], produce)
        assert (first["skipped"], second["skipped"]) == (False, True)
        assert second["length"] == 1
        assert len(calls) == 1
        assert meta_path(output).exists()

    def test_reruns_on_changed_input_config_or_force(self, tmp_path):
        source = tmp_path / "in.txt"
        source.write_text("a")
        output = tmp_path / "out.txt"

        def produce():
            output.write_text(source.read_text())

        cached_step("copy", "h", [source], [output], produce)
        source.write_text("b")
        assert not cached_step("copy", "h", [source], [output], produce)["skipped"]
        assert not cached_step("copy", "other", [source], [output], produce)["skipped"]
        assert not cached_step("copy", "other", [source], [output], produce, force=True)["skipped"]
        assert not cached_step("copy", "other", [source], [output], produce, params={"k": 2})["skipped"]

    def test_edited_output_is_rebuilt(self, tmp_path):
        output = tmp_path / "out.txt"
        cached_step("write", "h", [], [output], lambda: output.write_text("x") and None)
        output.write_text("tampered")
        assert not cached_step("write", "h", [], [output], lambda: output.write_text("x") and None)["skipped"]

    def test_missing_input(self, tmp_path):
        with pytest.raises(MissingInputError):
            cached_step("copy", "h", [tmp_path / "absent"], [tmp_path / "out"], lambda: None)

    def test_unwritten_output(self, tmp_path):
        with pytest.raises(RuntimeError, match="did not write"):
            cached_step("noop", "h", [], [tmp_path / "never"], lambda: None)


def _write_fixture_run(tmp_path, figure_passages, figure_keys, run):
    qrels_path = tmp_path / "qrels.txt"
    write_qrels(qrels_path, build_qrels(figure_passages, figure_keys))
    run_path = tmp_path / "run.trec"
    write_run(run_path, run, "fixture")
    return str(run_path), str(qrels_path)


class TestEvaluationCommands:
    def test_perfect_run(self, pipeline, tmp_path, figure_passages, figure_keys):
        run = [ranked("q_bromley", ["p_bromley", "p_misc"]), ranked("q_qe2", ["p_qe2", "p_other"])]
        run_path, qrels_path = _write_fixture_run(tmp_path, figure_passages, figure_keys, run)
        result = pipeline.evaluate(run_path, qrels_path, name="perfect")
        assert result["metrics"]["MRR@10"] == 100.0
        assert result["metrics"]["P@1"] == 100.0
        report = json.loads(pipeline.report_path("perfect", ".json").read_text())
        assert report["config"]["run"] == "run.trec"
        assert "100.0" in pipeline.report_path("perfect", ".txt").read_text()

    def test_reading_comprehension_scores(self, pipeline, tmp_path, figure_passages, figure_keys):
        from evaluation import save_answer_keys

        save_answer_keys(pipeline.answer_keys_path, figure_keys)
        predictions = tmp_path / "predictions.jsonl"
        predictions.write_text(
            '{"question_id": "q_bromley", "prediction": "Bromley"}\n{"question_id": "q_qe2", "prediction": "1970"}\n'
        )
        run_path, qrels_path = _write_fixture_run(tmp_path, figure_passages, figure_keys, [ranked("q_qe2", ["p_qe2"])])
        result = pipeline.evaluate(run_path, qrels_path, predictions=str(predictions))
        assert result["metrics"]["EM"] == 50.0

    def test_identical_runs_are_not_significant(self, pipeline, tmp_path, figure_passages, figure_keys):
        run = [ranked("q_bromley", ["p_other", "p_bromley"]), ranked("q_qe2", ["p_qe2"])]
        run_path, qrels_path = _write_fixture_run(tmp_path, figure_passages, figure_keys, run)
        result = pipeline.significance(run_path, run_path, qrels_path)
        assert result["p_value"] == 1.0
        assert result["description"] == "p = 1, not significant at 0.01"
        assert not result["significant"]

    def test_unknown_metric(self, pipeline, tmp_path, figure_passages, figure_keys):
        run_path, qrels_path = _write_fixture_run(tmp_path, figure_passages, figure_keys, [ranked("q_qe2", ["p_qe2"])])
        with pytest.raises(ValueError, match="unknown metric"):
            pipeline.significance(run_path, run_path, qrels_path, metric="NDCG@10")

    def test_alpha_one_fusion_reproduces_the_text_ranking(self, pipeline, tmp_path):
        text = tmp_path / "text.trec"
        image = tmp_path / "image.trec"
        write_run(text, [ranked("q", ["a", "b", "c"], [3.0, 2.0, 1.0])], "text")
        write_run(image, [ranked("q", ["c", "b", "a"], [0.9, 0.5, 0.1])], "image")
        result = pipeline.fuse(str(text), str(image), "fused", alpha=1.0)
        assert result["alpha"] == 1.0
        assert read_run(pipeline.run_path("fused"))["q"].passage_ids == ["a", "b", "c"]

    def test_fuse_needs_alpha_or_validation(self, pipeline):
        with pytest.raises(ValueError):
            pipeline.fuse("a", "b", "c")


class TestPipelineChain:
    def test_tiny_experiment(self, pipeline):
        synth = pipeline.synth()
        assert synth["documents"] == 12 and synth["visual_questions"] == 24
        assert pipeline.synth()["skipped"]

        corpus = pipeline.build_corpus()
        assert corpus["dropped"] == {}
        split = pipeline.split()
        assert split["documents"] == {"train": 6, "validation": 3, "test": 3}
        assert len(read_qrels(pipeline.qrels_path("visual", "test"))) == split["visual_questions"]["test"]
        pairs = pipeline.ict_pairs()
        assert pairs["train"]["pairs"] > 0

        stage2 = pipeline.train(2, "ilf")
        assert stage2["stage"] == 2 and stage2["best_step"] in (0, 1, 2)
        model = stage2["outputs"][0]

        pipeline.index("bm25")
        mined = pipeline.mine_negatives("visual", "train")
        assert mined["questions"] == split["visual_questions"]["train"]
        stage3 = pipeline.train(3, "ilf", init=model, name="final")
        final = stage3["outputs"][0]

        embedded = pipeline.embed(model=final)
        assert embedded["dim"] == 8
        index = pipeline.index("dense", embeddings=embedded["outputs"][0])
        dense = pipeline.search("dense", "visual", "test", model=final, index=index["outputs"][0])
        bm25 = pipeline.search("bm25", "visual", "test")
        assert dense["k"] == 10

        qrels = str(pipeline.qrels_path("visual", "test"))
        dense_run, bm25_run = dense["outputs"][0], bm25["outputs"][0]
        scores = pipeline.evaluate(dense_run, qrels)["metrics"]
        assert 0.0 <= scores["MRR@10"] <= 100.0
        assert set(scores) == {"MRR@10", "P@1", "P@5", "Hits@5"}

        fused = pipeline.fuse(dense_run, bm25_run, "fused", alpha=0.5)
        assert fused["questions"] == len(read_run(dense_run))
        report = pipeline.report(
            {"ilf": dense_run, "bm25": bm25_run}, qrels,
            logs={"ilf": stage3["outputs"][1]},
        )
        assert report["models"] == ["ilf", "bm25"]
        assert pipeline.report_path("report", ".training.html").exists()

        assert pipeline.evaluate(dense_run, qrels)["skipped"]
        pipeline.force = True
        assert not pipeline.evaluate(dense_run, qrels)["skipped"]

    def test_split_before_corpus_is_missing_input(self, pipeline):
        with pytest.raises(MissingInputError):
            pipeline.split()


@pytest.mark.slow
def test_fused_encoders_beat_text_baseline(tmp_path):
    """Shipped synthetic config: half the questions are answerable only through the image."""
    from pathlib import Path

    config = load_config(Path(__file__).resolve().parent.parent / "configs" / "synthetic.yaml")
    config.paths.root = str(tmp_path)
    pipeline = Pipeline(config, threads=2, progress=False)
    pipeline.synth()
    pipeline.build_corpus()
    pipeline.split()
    pipeline.ict_pairs()
    qrels = str(pipeline.qrels_path("visual", "test"))
    stage1 = pipeline.train(1, "text")["outputs"][0]

    def retrieve(final):
        embedded = pipeline.embed(model=final)
        index = pipeline.index("dense", embeddings=embedded["outputs"][0])
        return pipeline.search("dense", "visual", "test", model=final, index=index["outputs"][0])["outputs"][0]

    runs = {"text": retrieve(pipeline.train(3, "text", init=stage1, name="text")["outputs"][0])}
    for kind in ("eca", "ilf"):
        stage2 = pipeline.train(2, kind, init=stage1)["outputs"][0]
        runs[kind] = retrieve(pipeline.train(3, kind, init=stage2, name=kind)["outputs"][0])

    mrr = {kind: pipeline.evaluate(run, qrels)["metrics"]["MRR@100"] for kind, run in runs.items()}
    for kind in ("eca", "ilf"):
        assert mrr[kind] >= 1.1 * mrr["text"], mrr
        test = pipeline.significance(runs[kind], runs["text"], qrels)
        assert test["p_value"] <= 0.01, test
        assert test["mean_a"] > test["mean_b"]
