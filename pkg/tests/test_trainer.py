"""Optimizer arithmetic, clipping law, epoch selection, and the
two-step schedule."""

import numpy as np
import pytest

from zpreader import reader
from zpreader.errors import NonFiniteError, ValidationError
from zpreader.reader import ReaderConfig, init_params
from zpreader.tensorcore import parameter
from zpreader.trainer import (Adam, TrainConfig, accuracy, clip_gradients,
                              mean_loss, train, two_step_train)
from zpreader.vocab import MappedTriple

CFG = ReaderConfig(vocab_total=8, embed_dim=2, hidden_dim=2, rng_seed=3)


def sample(doc, query, answer):
    return MappedTriple(doc_ids=list(doc), query_ids=list(query),
                        answer_id=answer)


SAMPLES = [
    sample([3, 4, 5], [1, 6], 4),
    sample([5, 2, 3], [6, 1], 5),
    sample([4, 7, 2], [1, 7], 7),
    sample([6, 3], [2, 5], 3),
]
VAL = [sample([2, 5, 7], [1, 3], 5), sample([3, 6], [4, 1], 6)]


def adam_oracle(x0, grads, lr, b1, b2, eps):
    """Textbook bias-corrected moment recursion, elementwise."""
    x = np.array(x0, dtype=float)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    for t, g in enumerate(grads, start=1):
        g = np.asarray(g, dtype=float)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        x = x - lr * m_hat / (np.sqrt(v_hat) + eps)
    return x


class TestAdam:
    def test_matches_oracle_trajectory(self):
        cfg = TrainConfig(learning_rate=0.05, beta1=0.9, beta2=0.999,
                          epsilon=1e-8)
        x0 = [1.0, -2.0, 0.5]
        grads = [[np.cos(0.7 * t + i) for i in range(3)] for t in range(12)]
        tensor = parameter(x0)
        opt = Adam([tensor], cfg)
        for g in grads:
            tensor.grad = np.array(g, dtype=float)
            opt.step()
        expect = adam_oracle(x0, grads, 0.05, 0.9, 0.999, 1e-8)
        np.testing.assert_allclose(tensor.data, expect, rtol=0, atol=1e-12)

    def test_skips_tensors_without_grads(self):
        cfg = TrainConfig(learning_rate=0.1)
        live = parameter([1.0])
        frozen = parameter([5.0])
        opt = Adam([live, frozen], cfg)
        live.grad = np.array([1.0])
        opt.step()
        assert live.data[0] != 1.0
        assert frozen.data[0] == 5.0

    def test_step_counter_shared_across_tensors(self):
        # Two tensors fed identical grads must move identically: the
        # bias correction uses one global step count, not per-tensor.
        cfg = TrainConfig(learning_rate=0.01)
        a, b = parameter([1.0]), parameter([1.0])
        opt = Adam([a, b], cfg)
        for _ in range(3):
            a.grad = np.array([0.3])
            b.grad = np.array([0.3])
            opt.step()
        assert a.data[0] == b.data[0]


class TestClipping:
    def test_below_threshold_untouched(self):
        t = parameter([3.0, 4.0])
        t.grad = np.array([0.3, 0.4])
        pre, post = clip_gradients([t], max_norm=10.0)
        assert pre == post == pytest.approx(0.5, abs=1e-15)
        np.testing.assert_array_equal(t.grad, [0.3, 0.4])

    def test_above_threshold_scaled_to_norm(self):
        a = parameter([0.0])
        b = parameter([0.0])
        a.grad = np.array([3.0])
        b.grad = np.array([4.0])
        pre, post = clip_gradients([a, b], max_norm=2.5)
        assert pre == pytest.approx(5.0, abs=1e-12)
        assert post == pytest.approx(2.5, abs=1e-12)
        np.testing.assert_allclose(a.grad, [1.5], atol=1e-12)
        np.testing.assert_allclose(b.grad, [2.0], atol=1e-12)

    def test_direction_preserved(self):
        t = parameter(np.zeros(4))
        g = np.array([1.0, -2.0, 3.0, -4.0])
        t.grad = g.copy()
        pre, _ = clip_gradients([t], max_norm=1.0)
        np.testing.assert_allclose(t.grad, g / pre, atol=1e-12)

    def test_none_grads_ignored(self):
        has = parameter([1.0])
        has.grad = np.array([6.0])
        none = parameter([1.0])
        pre, post = clip_gradients([has, none], max_norm=3.0)
        assert (pre, post) == (pytest.approx(6.0), pytest.approx(3.0))
        assert none.grad is None

    def test_non_finite_norm_raises(self):
        t = parameter([1.0])
        t.grad = np.array([np.inf])
        with pytest.raises(NonFiniteError, match="not finite"):
            clip_gradients([t], max_norm=1.0)


class TestTrainLoop:
    def test_frozen_learning_rate_stops_after_patience(self):
        """With lr=0 the loss never changes, so epoch 1 is the lone
        improvement and patience=2 ends the run at exactly 3 epochs."""
        params = init_params(CFG)
        cfg = TrainConfig(learning_rate=0.0, batch_size=2, max_epochs=50,
                          patience=2)
        _, report = train(params, SAMPLES, VAL, cfg)
        assert len(report.epochs) == 3
        assert report.best_epoch == 1
        assert [e.improved for e in report.epochs] == [True, False, False]

    def test_deterministic_given_seeds(self):
        cfg = TrainConfig(learning_rate=0.05, batch_size=2, max_epochs=3,
                          patience=5, rng_seed=11)
        best_a, rep_a = train(init_params(CFG), SAMPLES, VAL, cfg)
        best_b, rep_b = train(init_params(CFG), SAMPLES, VAL, cfg)
        for ta, tb in zip(best_a.tensors(), best_b.tensors()):
            assert (ta.data == tb.data).all()
        assert [e.val_loss for e in rep_a.epochs] == \
               [e.val_loss for e in rep_b.epochs]
        assert rep_a.clip_norms == rep_b.clip_norms

    def test_best_params_reproduce_best_val_loss(self):
        cfg = TrainConfig(learning_rate=0.1, batch_size=2, max_epochs=4,
                          patience=4)
        best, report = train(init_params(CFG), SAMPLES, VAL, cfg)
        assert mean_loss(best, VAL) == pytest.approx(report.best_val_loss,
                                                     abs=1e-12)
        assert report.best_val_loss == min(e.val_loss for e in report.epochs)

    def test_step_accounting(self):
        cfg = TrainConfig(learning_rate=0.01, batch_size=3, max_epochs=2,
                          patience=5)
        _, report = train(init_params(CFG), SAMPLES, VAL, cfg)
        # 4 samples at batch_size 3 -> 2 optimizer steps per epoch
        assert report.steps == 4
        assert len(report.clip_norms) == 4
        assert all(n <= cfg.clip_norm + 1e-12 for n in report.clip_norms)

    def test_empty_validation_warns_and_selects_on_train(self):
        cfg = TrainConfig(learning_rate=0.05, batch_size=2, max_epochs=2,
                          patience=3)
        with pytest.warns(UserWarning, match="validation set is empty"):
            _, report = train(init_params(CFG), SAMPLES, [], cfg)
        for e in report.epochs:
            assert e.val_loss == e.train_loss

    @pytest.mark.parametrize("data,fragment", [
        ([], "training set is empty"),
        ([sample([1], [2], None)], "no answer id"),
        ([sample([], [2], 3)], "empty sequence"),
    ])
    def test_sample_validation(self, data, fragment):
        with pytest.raises(ValidationError, match=fragment):
            train(init_params(CFG), data, VAL, TrainConfig())

    def test_training_reduces_loss_on_tiny_set(self):
        cfg = TrainConfig(learning_rate=0.1, batch_size=4, max_epochs=15,
                          patience=15)
        data = SAMPLES[:2]
        params = init_params(CFG)
        before = mean_loss(params, data)
        best, _ = train(params, data, data, cfg)
        assert mean_loss(best, data) < before


class TestMetrics:
    def test_mean_loss_is_average_of_sample_losses(self):
        params = init_params(CFG)
        per_sample = []
        for s in VAL:
            l, _ = reader.loss(params, s.doc_ids, s.query_ids, s.answer_id)
            per_sample.append(l.item())
        assert mean_loss(params, VAL) == pytest.approx(np.mean(per_sample),
                                                       abs=1e-15)

    def test_accuracy_with_forced_pools(self):
        params = init_params(CFG)
        guaranteed_hit = sample([4], [1, 2], 4)       # only candidate
        guaranteed_miss = sample([3, 5], [1, 2], 6)   # answer outside pool
        assert accuracy(params, [guaranteed_hit]) == 1.0
        assert accuracy(params, [guaranteed_hit, guaranteed_miss]) == 0.5


class TestTwoStep:
    def test_requires_task_samples(self):
        with pytest.raises(ValidationError, match="task samples"):
            two_step_train(CFG, SAMPLES, VAL, [], VAL,
                           TrainConfig(), TrainConfig())

    def test_equals_manual_composition(self):
        """The schedule must be: init, pretrain, clone the best weights,
        adapt with a fresh optimizer.  Replaying those calls by hand has
        to land on bit-identical parameters."""
        pre_cfg = TrainConfig(learning_rate=0.05, batch_size=2,
                              max_epochs=2, patience=3, rng_seed=1)
        adapt_cfg = TrainConfig(learning_rate=0.02, batch_size=2,
                                max_epochs=2, patience=3, rng_seed=2)
        task_train = [sample([5, 3, 6], [2, 4], 6), sample([2, 7], [3, 1], 2)]
        task_val = [sample([4, 6], [5, 2], 4)]

        result = two_step_train(CFG, SAMPLES, VAL, task_train, task_val,
                                pre_cfg, adapt_cfg)

        manual = init_params(CFG)
        best_pre, _ = train(manual, SAMPLES, VAL, pre_cfg)
        best_adapt, _ = train(best_pre.clone(), task_train, task_val,
                              adapt_cfg)
        for got, want in zip(result.params.tensors(), best_adapt.tensors()):
            assert (got.data == want.data).all()
        assert result.pretrain_report.steps > 0
        assert result.adapt_report.steps > 0


class TestTrainConfigValidation:
    @pytest.mark.parametrize("kwargs", [
        dict(learning_rate=-0.1),
        dict(batch_size=0),
        dict(max_epochs=0),
        dict(patience=0),
        dict(clip_norm=0.0),
        dict(beta1=1.0),
        dict(beta2=-0.1),
        dict(epsilon=0.0),
    ])
    def test_rejected(self, kwargs):
        with pytest.raises(ValidationError):
            TrainConfig(**kwargs)
