"""Tests for the autodiff primitives, optimiser, gradient checker and checkpoints."""

import numpy as np
import pytest

from autodiff import (
    Adam,
    AdamState,
    GradientOverflowError,
    Parameter,
    Tensor,
    TransformerConfig,
    adam_step,
    analytic_gradients,
    clip_grad_norm,
    concat_seq,
    cross_entropy,
    dropout,
    finite_difference_check,
    layer_norm,
    load_checkpoint,
    lr_schedule,
    mul,
    save_checkpoint,
    softmax,
    sum_all,
    take_position,
    write_npz,
)

from backend.synthetic import ImageEncoding, TextEncoding
from fusion.models import BiEncoder, FusionConfig
from trainer.loss import contrastive_loss


class TestPrimitives:
    def test_layer_norm_of_constant_is_zero(self):
        out = layer_norm(Tensor(np.full((2, 5), 3.0)))
        np.testing.assert_allclose(out.data, 0.0, atol=1e-12)

    def test_dropout_zero_is_identity(self, rng):
        x = Tensor(rng.normal(size=(3, 4)))
        assert dropout(x, 0.0, train=True, seed=[1]) is x
        assert dropout(x, 0.5, train=False, seed=[1]) is x

    def test_dropout_seeded(self, rng):
        x = Tensor(rng.normal(size=(8, 8)))
        first = dropout(x, 0.3, train=True, seed=[4, 2]).data
        np.testing.assert_array_equal(first, dropout(x, 0.3, train=True, seed=[4, 2]).data)

    def test_softmax_rows_sum_to_one(self, rng):
        probs = softmax(Tensor(rng.normal(size=(4, 6)))).data
        np.testing.assert_allclose(probs.sum(axis=-1), 1.0)

    @pytest.mark.parametrize("n", [2, 5, 10])
    def test_cross_entropy_gradient_at_uniform_logits(self, n):
        logits = Parameter(np.zeros((1, n)), "logits")
        cross_entropy(logits, [0]).backward()
        assert logits.grad[0, 0] == pytest.approx(1.0 / n - 1.0)
        np.testing.assert_allclose(logits.grad[0, 1:], 1.0 / n)

    def test_concat_seq_places_extra_after_each_row(self):
        tokens = Tensor(np.arange(2 * 3 * 1, dtype=float).reshape(2, 3, 1))
        extra = Tensor(np.array([[[100.0]], [[200.0]]]))
        out = concat_seq(tokens, extra, lengths=[1, 3])
        np.testing.assert_array_equal(out.data[0, :, 0], [0.0, 100.0, 1.0, 2.0])
        np.testing.assert_array_equal(out.data[1, :, 0], [3.0, 4.0, 5.0, 200.0])

    def test_take_position_gradient(self):
        x = Parameter(np.ones((2, 3, 4)), "x")
        sum_all(take_position(x, 1)).backward()
        assert x.grad[:, 1].sum() == 8.0
        assert x.grad[:, [0, 2]].sum() == 0.0


class TestAdam:
    def test_first_step_moves_by_lr(self):
        p = Parameter(np.array([0.5]), "p")
        p.grad = np.array([1.0])
        adam_step([p], AdamState(), lr=1e-3)
        assert p.data[0] == pytest.approx(0.5 - 1e-3, abs=1e-9)

    def test_zero_gradient_keeps_parameter(self):
        p = Parameter(np.array([0.5, -2.0]), "p")
        p.grad = np.zeros(2)
        adam_step([p], AdamState(), lr=1e-2)
        np.testing.assert_array_equal(p.data, [0.5, -2.0])

    def test_frozen_parameter_unchanged(self):
        p = Parameter(np.array([1.0]), "p", frozen=True)
        p.grad = np.array([5.0])
        optimizer = Adam([p])
        optimizer.step(1e-1)
        assert p.data[0] == 1.0

    def test_step_counter_and_moments(self):
        p = Parameter(np.array([0.0]), "p")
        optimizer = Adam([p])
        for _ in range(3):
            p.grad = np.array([1.0])
            optimizer.step(1e-3)
        assert optimizer.state.step == 3
        assert "p" in optimizer.state.m and "p" in optimizer.state.v

    def test_non_finite_gradient_rejected(self):
        p = Parameter(np.array([0.0]), "p")
        p.grad = np.array([np.nan])
        with pytest.raises(GradientOverflowError):
            adam_step([p], AdamState(), lr=1e-3)


class TestClipGradNorm:
    def test_scales_down_to_max_norm(self):
        a, b = Parameter(np.zeros(2), "a"), Parameter(np.zeros(1), "b")
        a.grad, b.grad = np.array([0.0, 4.0 * 0.6]), np.array([4.0 * 0.8])
        assert clip_grad_norm([a, b], 2.0) == pytest.approx(4.0)
        assert np.sqrt(np.sum(a.grad ** 2) + np.sum(b.grad ** 2)) == pytest.approx(2.0)
        assert b.grad[0] == pytest.approx(1.6)

    def test_small_norm_unchanged(self):
        a = Parameter(np.zeros(2), "a")
        a.grad = np.array([0.6, 0.8])
        assert clip_grad_norm([a], 2.0) == pytest.approx(1.0)
        np.testing.assert_array_equal(a.grad, [0.6, 0.8])

    def test_zero_gradients(self):
        a = Parameter(np.zeros(3), "a")
        a.grad = np.zeros(3)
        assert clip_grad_norm([a], 2.0) == 0.0


class TestLrSchedule:
    def test_warmup_midpoint(self):
        assert lr_schedule("linear_warmup", 2e-5, 100, 50, 1000) == pytest.approx(1e-5)

    def test_peak_at_warmup_end(self):
        assert lr_schedule("linear_warmup", 2e-5, 100, 100, 1000) == pytest.approx(2e-5)

    def test_linear_decay_to_zero(self):
        assert lr_schedule("linear_warmup", 1.0, 10, 55, 100) == pytest.approx(0.5)
        assert lr_schedule("linear_warmup", 1.0, 10, 100, 100) == 0.0

    @pytest.mark.parametrize("step", [0, 7, 10_000])
    def test_constant(self, step):
        assert lr_schedule("constant", 2e-3, 0, step) == 2e-3

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            lr_schedule("cosine", 1.0, 0, 1)


def _toy_bi_encoder(kind: str, use_positions: bool = True) -> BiEncoder:
    transformer = TransformerConfig(
        layers=2, model_dim=16, heads=2, ffn_dim=32, dropout_prob=0.0, max_seq=16, use_positions=use_positions,
    )
    return BiEncoder(FusionConfig(kind=kind, transformer=transformer, text_dim=16, image_dim=6), seed=5)


def _toy_batch(rng, count=3, image_dim=6, lengths=(4, 3, 5)):
    texts = [TextEncoding(list(range(n)), rng.normal(size=(n, 16))) for n in lengths[:count]]
    images = [ImageEncoding(rng.normal(size=image_dim)) for _ in range(count)]
    return texts, images


class TestFiniteDifferenceCheck:
    def test_quadratic(self):
        x = Parameter(np.array([1.0, 2.0]), "x")
        loss = lambda: sum_all(mul(x, x))
        np.testing.assert_allclose(analytic_gradients(loss, [x])["x"], [2.0, 4.0])
        assert finite_difference_check(loss, [x]) < 1e-8

    def test_frozen_parameter_reports_zero(self):
        x = Parameter(np.array([1.0, 2.0]), "x")
        y = Parameter(np.array([3.0]), "y", frozen=True)
        grads = analytic_gradients(lambda: sum_all(mul(x, y)), [x, y])
        np.testing.assert_array_equal(grads["y"], [0.0])
        np.testing.assert_allclose(grads["x"], [3.0, 3.0])

    @pytest.mark.parametrize("kind", ["eca", "ilf"])
    def test_full_contrastive_loss(self, kind):
        rng = np.random.default_rng(0)
        model = _toy_bi_encoder(kind)
        q_texts, q_images = _toy_batch(rng)
        p_texts, p_images = _toy_batch(rng, lengths=(3, 5, 2))

        def loss():
            q = model.encode_questions(q_texts, q_images)
            p = model.encode_passages(p_texts, p_images)
            return contrastive_loss(q, p)

        assert finite_difference_check(loss, model.parameters(), eps=1e-5, sample=6) < 1e-4


class TestCheckpoint:
    def test_round_trip_is_bit_exact(self, tmp_path, rng):
        params = {"w": rng.normal(size=(3, 2)), "b": rng.normal(size=2)}
        state = AdamState(step=7, m={"w": rng.normal(size=(3, 2))}, v={"w": rng.random(size=(3, 2))})
        path = save_checkpoint(tmp_path / "model.npz", params, {"kind": "ilf", "lr": 2e-3}, state)
        loaded, config, loaded_state = load_checkpoint(path)
        assert config == {"kind": "ilf", "lr": 2e-3}
        for name, value in params.items():
            np.testing.assert_array_equal(loaded[name], value)
        assert loaded_state.step == 7
        np.testing.assert_array_equal(loaded_state.v["w"], state.v["w"])

    def test_identical_arrays_give_identical_bytes(self, tmp_path, rng):
        arrays = {"b": rng.normal(size=4), "a": np.arange(3)}
        first = write_npz(tmp_path / "one.npz", arrays).read_bytes()
        second = write_npz(tmp_path / "two.npz", dict(reversed(list(arrays.items())))).read_bytes()
        assert first == second
        with np.load(tmp_path / "one.npz") as archive:
            assert sorted(archive.files) == ["a", "b"]
