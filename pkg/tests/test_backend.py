"""Tests for the synthetic encoders, precomputed tables and the synthetic knowledge base."""

import numpy as np
import pytest

from backend import (
    Backend,
    DimensionMismatchError,
    EmbeddingTable,
    SyntheticWorld,
    UnlabeledImageError,
    WorldConfig,
    cosine_scores,
    encode_image_synthetic,
    encode_text_synthetic,
    generate_kvqae,
    load_precomputed,
    save_precomputed,
    split_questions,
)
from corpus.documents import ImageRef
from corpus.ict import IctConfig, make_corpus_ict_pairs
from evaluation.answers import passage_relevance


@pytest.fixture
def world():
    return SyntheticWorld(entity_count=50, latent_dim=8, text_dim=16, image_dim=24, noise_sigma=0.05, seed=2)


def _cos(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


class TestEncodeText:
    def test_empty_text(self, world):
        encoding = encode_text_synthetic("", world)
        assert encoding.tokens == [0]
        np.testing.assert_array_equal(encoding.embeddings, np.zeros((1, 16)))

    def test_deterministic(self, world):
        first = encode_text_synthetic("The harbor of Karo is busy.", world)
        second = encode_text_synthetic("The harbor of Karo is busy.", world)
        assert first.tokens == second.tokens
        np.testing.assert_array_equal(first.embeddings, second.embeddings)

    def test_summary_slot_is_token_mean(self, world):
        encoding = encode_text_synthetic("old stone bridge", world)
        np.testing.assert_allclose(encoding.summary, encoding.embeddings[1:].mean(axis=0))

    def test_shared_entity_raises_similarity(self, world):
        rng = np.random.default_rng(0)
        filler = ["old", "market", "green", "trade", "valley", "winter", "museum", "quiet"]

        def words():
            return " ".join(rng.choice(filler, size=2))

        same, other = [], []
        for _ in range(1000):
            a, b = rng.choice(world.entity_count, size=2, replace=False)
            name_a, name_b = world.entity_names[a], world.entity_names[b]
            anchor = encode_text_synthetic(f"{name_a} {words()}", world).summary
            same.append(_cos(anchor, encode_text_synthetic(f"{name_a} {words()}", world).summary))
            other.append(_cos(anchor, encode_text_synthetic(f"{name_b} {words()}", world).summary))
        assert np.mean(same) > np.mean(other)


class TestEncodeImage:
    def test_same_entity_without_noise(self):
        world = SyntheticWorld(entity_count=10, latent_dim=4, text_dim=8, image_dim=8, noise_sigma=0.0)
        a = encode_image_synthetic(ImageRef("x/1.jpg", "jpeg", 3), world).vector
        b = encode_image_synthetic(ImageRef("y/2.jpg", "jpeg", 3), world).vector
        np.testing.assert_array_equal(a, b)

    def test_different_entities_differ(self):
        world = SyntheticWorld(entity_count=10, latent_dim=4, text_dim=8, image_dim=8, noise_sigma=0.0)
        vectors = [encode_image_synthetic(ImageRef(f"{k}.jpg", "jpeg", k), world).vector for k in range(10)]
        distances = [np.linalg.norm(vectors[i] - vectors[j]) for i in range(10) for j in range(i + 1, 10)]
        assert min(distances) > 1e-6

    def test_unlabeled_image(self, world):
        with pytest.raises(UnlabeledImageError):
            encode_image_synthetic(ImageRef("photo.jpg", "jpeg"), world)

    def test_linear_probe_recovers_identity(self, world):
        # least squares from image vectors to text-side entity vectors
        entities = np.arange(world.entity_count)
        train_x = np.array([encode_image_synthetic(ImageRef(f"train/{k}/{r}.jpg", "jpeg", k), world).vector
                            for r in range(4) for k in entities])
        train_y = np.array([world.latents[k] @ world.text_map for _ in range(4) for k in entities])
        probe, *_ = np.linalg.lstsq(train_x, train_y, rcond=None)
        targets = np.array([world.latents[k] @ world.text_map for k in entities])
        test_x = np.array([encode_image_synthetic(ImageRef(f"test/{k}.jpg", "jpeg", k), world).vector for k in entities])
        predicted = test_x @ probe
        nearest = np.argmin(((predicted[:, None, :] - targets[None, :, :]) ** 2).sum(axis=-1), axis=1)
        assert np.mean(nearest == entities) > 0.9


class TestPrecomputed:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert len(load_precomputed(path)) == 0

    def test_round_trip_bit_identical(self, tmp_path, rng):
        table = EmbeddingTable(ids=["a", "b", "c"], matrix=rng.normal(size=(3, 5)) * 1e3)
        path = tmp_path / "table.jsonl"
        save_precomputed(path, table)
        loaded = load_precomputed(path)
        assert loaded.ids == ["a", "b", "c"]
        np.testing.assert_array_equal(loaded.matrix, table.matrix)

    def test_width_mismatch_names_the_id(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "first", "vector": [1, 2, 3, 4]}\n{"id": "second", "vector": [1, 2, 3, 4, 5]}\n')
        with pytest.raises(DimensionMismatchError, match="second"):
            load_precomputed(path)

    def test_backend_prefers_table_vectors(self, world):
        table = EmbeddingTable(ids=["known.jpg"], matrix=np.full((1, world.image_dim), 0.5))
        backend = Backend(world, table)
        np.testing.assert_array_equal(backend.encode_image(ImageRef("known.jpg", "jpeg")).vector, 0.5)
        np.testing.assert_array_equal(backend.encode_image(None).vector, np.zeros(world.image_dim))

    def test_backend_memo_is_bounded(self, world):
        backend = Backend(world, cache_size=2)
        first = backend.encode_text("alpha beta")
        assert backend.encode_text("alpha beta") is first
        for text in ("gamma", "delta", "epsilon"):
            backend.encode_text(text)
        assert backend._texts.cache_info().currsize == 2
        again = backend.encode_text("alpha beta")
        assert again is not first
        np.testing.assert_array_equal(again.embeddings, first.embeddings)
        image = ImageRef("a.jpg", "jpeg", entity=3)
        backend.encode_image(image)
        backend.clear_cache()
        assert backend._images.cache_info().currsize == 0

    def test_backend_rejects_wrong_table_width(self, world):
        with pytest.raises(DimensionMismatchError):
            Backend(world, EmbeddingTable(ids=["x"], matrix=np.zeros((1, world.image_dim + 1))))


class TestGenerateKvqae:
    def test_every_question_has_a_relevant_article_passage(self, world):
        kb = generate_kvqae(world, WorldConfig(relations=4, paragraphs=2, sentences_per_paragraph=3))
        passages = kb.passages()
        assert len(kb.documents) == world.entity_count
        assert len(kb.questions) == world.entity_count * 4
        for question in kb.questions:
            doc_id = question.question_id.split("-")[0]
            key = kb.answer_keys[question.question_id]
            assert any(passage_relevance(p.text, key) for p in passages if p.doc_id == doc_id)

    def test_image_only_questions_do_not_name_the_entity(self, world):
        kb = generate_kvqae(world, WorldConfig(image_only_share=1.0))
        names = {name.lower() for name in world.entity_names}
        for question in kb.questions:
            assert not names & set(question.text.lower().rstrip("?").split())
            assert question.image is not None

    def test_articles_yield_ict_pairs(self, world):
        kb = generate_kvqae(world, WorldConfig(relations=2, paragraphs=2, sentences_per_paragraph=3))
        pairs, report = make_corpus_ict_pairs(kb.documents, IctConfig(leave_in_prob=0.0), 0)
        assert len(pairs) + report["question_in_context"] == world.entity_count * 6
        assert report["no_infobox_image"] == 0

    def test_deterministic(self, world):
        first = generate_kvqae(world, WorldConfig(seed=4))
        second = generate_kvqae(world, WorldConfig(seed=4))
        assert [d.to_record() for d in first.documents] == [d.to_record() for d in second.documents]

    def test_split_questions_partition(self, world):
        kb = generate_kvqae(world)
        parts = split_questions(kb.questions, (0.5, 0.2, 0.3), seed=1)
        ids = [q.question_id for part in parts for q in part]
        assert sorted(ids) == sorted(q.question_id for q in kb.questions)
        assert len(set(ids)) == len(ids)


class TestCosineScores:
    def test_scores_against_rows(self):
        matrix = np.array([[2.0, 0.0], [0.0, 3.0], [1.0, 1.0], [0.0, 0.0]])
        scores = cosine_scores(np.array([1.0, 0.0]), matrix)
        np.testing.assert_allclose(scores, [1.0, 0.0, np.sqrt(0.5), 0.0])

    def test_empty_matrix(self):
        assert cosine_scores(np.ones(3), np.zeros((0, 3))).shape == (0,)
