"""Tests for the contrastive loss, in-batch MRR, the stage runner and hard negative mining."""

import math

import numpy as np
import pytest

from autodiff import TransformerConfig
from backend import Backend, SyntheticWorld, WorldConfig, generate_kvqae
from corpus.documents import Passage, VisualQuestion
from corpus.ict import IctConfig, make_corpus_ict_pairs
from evaluation.answers import AnswerKey, passage_relevance
from evaluation.metrics import Qrels
from fusion.models import BiEncoder, FusionConfig
from index.bm25 import build_bm25_from_passages
from trainer import (
    NoNegativesError,
    NonFiniteLossError,
    StagePlan,
    TrainLog,
    bm25_retriever,
    build_ict_examples,
    build_qa_examples,
    contrastive_loss,
    inbatch_mrr,
    index_passages,
    mine_all,
    mine_hard_negatives,
    run_stage,
    validate,
)
from conftest import ranked


def _log_softmax_rows(scores):
    shifted = scores - scores.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


class TestContrastiveLoss:
    def test_equal_scores_give_log_two(self):
        q = np.array([[1.0, 0.0], [0.0, 1.0]])
        p = np.array([[1.0, 0.0], [1.0, 0.0]])
        assert float(contrastive_loss(q, p).data) == pytest.approx(math.log(2))

    def test_dominant_positive_gives_zero(self):
        loss = contrastive_loss(50.0 * np.eye(3), np.eye(3))
        assert float(loss.data) < 1e-10

    def test_matches_row_wise_softmax(self, rng):
        scores = rng.normal(size=(3, 3))
        expected = -np.mean(np.diag(_log_softmax_rows(scores)))
        assert float(contrastive_loss(scores, np.eye(3)).data) == pytest.approx(expected)

    def test_hard_negatives_are_shared(self, rng):
        q, p, neg = rng.normal(size=(3, 4)), rng.normal(size=(3, 4)), rng.normal(size=(2, 4))
        scores = q @ np.vstack([p, neg]).T
        expected = -np.mean(_log_softmax_rows(scores)[np.arange(3), np.arange(3)])
        assert float(contrastive_loss(q, p, neg).data) == pytest.approx(expected)

    def test_single_question_needs_negatives(self, rng):
        with pytest.raises(NoNegativesError):
            contrastive_loss(rng.normal(size=(1, 4)), rng.normal(size=(1, 4)))
        assert np.isfinite(float(contrastive_loss(rng.normal(size=(1, 4)), rng.normal(size=(1, 4)), rng.normal(size=(1, 4))).data))


class TestInbatchMrr:
    def test_identity(self):
        assert inbatch_mrr(np.eye(4), np.eye(4)) == 1.0

    def test_equidistant_is_pessimistic(self):
        assert inbatch_mrr(np.ones((4, 3)), np.ones((4, 3))) == pytest.approx(0.25)

    def test_one_swapped_pair(self):
        q = np.eye(4)
        q[0, :2] = [0.5, 1.0]
        q[1, :2] = [1.0, 0.5]
        assert inbatch_mrr(q, np.eye(4)) == pytest.approx(0.75)

    def test_needs_two_questions(self):
        with pytest.raises(ValueError):
            inbatch_mrr(np.eye(1), np.eye(1))


class TestStagePlan:
    def test_recipe_defaults(self):
        plan = StagePlan.defaults(2, "ilf")
        assert (plan.batch_size, plan.lr, plan.schedule, plan.frozen_last_l) == (512, 2e-3, "constant", 12)
        assert plan.clip_norm == 2.0

    def test_overrides(self):
        assert StagePlan.defaults(3, "eca", batch_size=8).batch_size == 8

    def test_invalid_values(self):
        with pytest.raises(ValueError):
            StagePlan(stage=4, kind="eca", batch_size=8, lr=1e-3)
        with pytest.raises(ValueError):
            StagePlan(stage=2, kind="late", batch_size=8, lr=1e-3)
        with pytest.raises(ValueError):
            StagePlan(stage=2, kind="eca", batch_size=0, lr=1e-3)

    def test_no_default_for_text_stage_two(self):
        with pytest.raises(ValueError):
            StagePlan.defaults(2, "text")


def _world(entities=12):
    return SyntheticWorld(entity_count=entities, latent_dim=4, text_dim=16, image_dim=8, noise_sigma=0.05, seed=0)


def _ict_examples(world, sentences=2):
    kb = generate_kvqae(world, WorldConfig(relations=2, paragraphs=2, sentences_per_paragraph=sentences, filler_words=(1, 2)))
    pairs, _ = make_corpus_ict_pairs(kb.documents, IctConfig(), 0)
    return pairs, build_ict_examples(pairs, Backend(world))


def _bi_encoder(kind, layers=1, dropout=0.0):
    transformer = TransformerConfig(layers=layers, model_dim=16, heads=2, ffn_dim=32, dropout_prob=dropout, max_seq=64)
    return BiEncoder(FusionConfig(kind=kind, transformer=transformer, text_dim=16, image_dim=8), seed=0)


@pytest.fixture(scope="module")
def ict_examples():
    return _ict_examples(_world())[1]


class TestRunStage:
    def test_zero_steps_returns_initial_model(self, ict_examples):
        model = _bi_encoder("ilf")
        before = model.state_dict()
        eval_set = ict_examples[:8]
        plan = StagePlan(stage=2, kind="ilf", batch_size=4, lr=1e-3, max_steps=0)
        result = run_stage(plan, ict_examples, model, eval_set)
        assert result.best_step == 0
        assert len(result.log.records) == 1
        assert result.log.records[0].loss is None
        assert result.best_mrr == pytest.approx(validate(model, eval_set, 4))
        for name, value in before.items():
            np.testing.assert_array_equal(result.model.state_dict()[name], value)

    def test_fully_frozen_tower_keeps_its_weights(self, ict_examples):
        model = _bi_encoder("eca", layers=2)
        before = model.state_dict()
        plan = StagePlan(stage=2, kind="eca", batch_size=4, lr=1e-2, max_steps=3, frozen_last_l=2, validation_every=1)
        result = run_stage(plan, ict_examples, model, ict_examples[:8])
        assert result.optimizer.state.step == 3
        after = result.model.state_dict()
        for tower in (model.question.tower, model.passage.tower):
            for name in tower.params:
                np.testing.assert_array_equal(after[name], before[name])

    def test_partial_freeze_only_touches_last_layers(self, ict_examples):
        model = _bi_encoder("eca", layers=2)
        plan = StagePlan(stage=2, kind="eca", batch_size=4, lr=1e-3, max_steps=1, frozen_last_l=1)
        run_stage(plan, ict_examples, model, ict_examples[:8])
        frozen = [p.name for p in model.parameters() if p.frozen]
        assert frozen and all(".layers.1." in name for name in frozen)

    def test_later_stages_train_every_layer(self, ict_examples):
        model = _bi_encoder("eca", layers=2)
        model.freeze(2)
        plan = StagePlan(stage=3, kind="eca", batch_size=4, lr=1e-3, max_steps=1, frozen_last_l=2)
        run_stage(plan, ict_examples, model, ict_examples[:8])
        assert not any(p.frozen for p in model.parameters())

    def test_log_and_validation_schedule(self, ict_examples, tmp_path):
        model = _bi_encoder("ilf")
        plan = StagePlan(stage=2, kind="ilf", batch_size=4, lr=1e-3, schedule="constant", max_steps=5, validation_every=2)
        result = run_stage(plan, ict_examples, model, ict_examples[:8])
        assert [r.step for r in result.log.records] == [0, 1, 2, 3, 4, 5]
        assert [step for step, _ in result.log.validations] == [0, 2, 4, 5]
        assert all(r.lr == 1e-3 for r in result.log.records[1:])
        assert result.best_mrr == max(mrr for _, mrr in result.log.validations)
        path = tmp_path / "log.jsonl"
        result.log.write(path)
        assert TrainLog.read(path).records == result.log.records

    def test_same_seed_same_run(self, ict_examples):
        plan = StagePlan(stage=2, kind="eca", batch_size=4, lr=1e-3, max_steps=2, seed=3)
        first = run_stage(plan, ict_examples, _bi_encoder("eca", dropout=0.1), ict_examples[:8])
        second = run_stage(plan, ict_examples, _bi_encoder("eca", dropout=0.1), ict_examples[:8])
        assert [r.loss for r in first.log.records] == [r.loss for r in second.log.records]

    def test_kind_mismatch(self, ict_examples):
        with pytest.raises(ValueError):
            run_stage(StagePlan(stage=2, kind="eca", batch_size=4, lr=1e-3), ict_examples, _bi_encoder("ilf"), ict_examples[:4])

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_loss_aborts(self, ict_examples):
        model = _bi_encoder("ilf")
        model.question.w_c.data[:] = np.inf
        plan = StagePlan(stage=2, kind="ilf", batch_size=4, lr=1e-3, max_steps=3)
        with pytest.raises(NonFiniteLossError) as info:
            run_stage(plan, ict_examples, model, ict_examples[:8])
        assert info.value.step == 1

    def test_validation_merges_trailing_singleton(self, ict_examples):
        model = _bi_encoder("ilf")
        assert 0.0 < validate(model, ict_examples[:5], 4) <= 1.0
        with pytest.raises(ValueError):
            validate(model, ict_examples[:1], 4)

    @pytest.mark.slow
    def test_ilf_learns_image_identity(self):
        world = SyntheticWorld(entity_count=40, latent_dim=4, text_dim=16, image_dim=8, noise_sigma=0.05, seed=0)
        pairs, examples = _ict_examples(world, sentences=3)
        # one pair per entity keeps validation batches free of duplicate entities
        seen, eval_set = set(), []
        for pair, example in zip(pairs, examples):
            if pair.source_doc not in seen:
                seen.add(pair.source_doc)
                eval_set.append(example)
        model = _bi_encoder("ilf")
        plan = StagePlan(
            stage=2, kind="ilf", batch_size=16, lr=5e-3, schedule="constant", frozen_last_l=1,
            max_steps=500, validation_every=50,
        )
        result = run_stage(plan, examples, model, eval_set)
        assert result.best_mrr >= 0.95


class TestBuildQaExamples:
    def test_questions_without_relevant_passage_are_skipped(self):
        world = _world()
        passages = index_passages([Passage("p1", "d1", "Title [SEP] text", 1, None), Passage("p0", "d1", "Title [SEP] more", 1, None)])
        questions = [VisualQuestion("q1", "what?"), VisualQuestion("q2", "who?")]
        qrels = Qrels({"q1": frozenset({"p1", "p0"}), "q2": frozenset()})
        examples = build_qa_examples(questions, qrels, passages, Backend(world), negatives={"q1": ["p1"]})
        assert [e.question_id for e in examples] == ["q1"]
        assert examples[0].positive_id == "p0"
        assert len(examples[0].hard_negatives) == 1


def _passages(texts):
    return {pid: Passage(pid, pid, text, len(text.split()), None) for pid, text in texts.items()}


class TestMineHardNegatives:
    question = VisualQuestion("q", "Where was the by-election?")

    def test_all_top_passages_contain_the_answer(self):
        passages = _passages({"a": "held in Bromley", "b": "Bromley again"})
        assert mine_hard_negatives(self.question, ["Bromley"], ranked("q", ["a", "b"]), 5, passages) == []

    def test_rank_one_without_answer_comes_first(self):
        passages = _passages({"a": "a seat in Kent", "b": "held in Bromley", "c": "a town hall"})
        assert mine_hard_negatives(self.question, ["Bromley"], ranked("q", ["a", "b", "c"]), 2, passages) == ["a", "c"]

    def test_k_limits_the_result(self):
        passages = _passages({"a": "one", "b": "two", "c": "three"})
        assert mine_hard_negatives(self.question, ["Bromley"], ranked("q", ["a", "b", "c"]), 1, passages) == ["a"]

    def test_aliases_also_exclude(self):
        key = AnswerKey("q", "Queen Elizabeth 2", frozenset({"QE2"}))
        passages = _passages({"a": "the QE2 sailed", "b": "a ferry sailed"})
        assert mine_hard_negatives(self.question, key, ranked("q", ["a", "b"]), 2, passages) == ["b"]

    def test_k_must_be_positive(self):
        with pytest.raises(ValueError):
            mine_hard_negatives(self.question, ["x"], ranked("q", ["a"]), 0, _passages({"a": "x"}))

    def test_bm25_negatives_never_relevant(self):
        world = _world(20)
        kb = generate_kvqae(world, WorldConfig(relations=3, paragraphs=2, sentences_per_paragraph=2))
        passages = kb.passages()
        retriever = bm25_retriever(build_bm25_from_passages(passages), depth=20)
        mined = mine_all(kb.text_questions, kb.answer_keys, retriever, 3, index_passages(passages), threads=2)
        assert set(mined) == {q.question_id for q in kb.text_questions}
        by_id = index_passages(passages)
        for qid, negatives in mined.items():
            assert len(negatives) <= 3
            for pid in negatives:
                assert not passage_relevance(by_id[pid].text, kb.answer_keys[qid])
