"""
tandemnet — Training Stack Tests
Losses, optimizers, batch normalization and the epoch loop.
"""

import math
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from data_ingestion.batching import Dataset, normalize
from data_ingestion.generate_seed_data import make_images
from data_ingestion.run_config import TrainConfig
from tandem.batchnorm import BatchNormState, batchnorm_backward, batchnorm_forward, batchnorm_forward_cached
from tandem.errors import DataError, NumericError, ParameterError, ShapeError
from tandem.losses import log_softmax, loss_ce, loss_mse
from tandem.network import GradientSet, LayerGrads, build_network
from tandem.optim import SGD, Adam, cosine_lr, make_optimizer, sgd_step
from tandem.trainer import evaluate, fit, infer_task
from utils.export import METRIC_COLUMNS, MetricWriter


def _grads_like(net, value=1.0):
    return GradientSet([LayerGrads(dW=np.full_like(layer.weights, value), db=np.full_like(layer.bias, value))
                        for layer in net.layers])


# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
#  Losses
# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

class TestLosses:
    def test_mse_perfect(self):
        value, grad = loss_mse(np.ones((2, 3)), np.ones((2, 3)))
        assert value == 0.0 and not grad.any()

    def test_mse_hand_arithmetic(self):
        value, grad = loss_mse(np.array([0.0, 0.0]), np.array([2.0, 0.0]))
        assert value == 2.0
        np.testing.assert_array_equal(grad, [-2.0, 0.0])

    def test_mse_shape_mismatch(self):
        with pytest.raises(ShapeError):
            loss_mse(np.zeros((2, 3)), np.zeros((3, 2)))

    def test_ce_uniform_logits(self):
        for k in (2, 10):
            value, _ = loss_ce(np.zeros((4, k)), np.arange(4) % k)
            assert math.isclose(value, math.log(k))

    def test_ce_gradient_matches_finite_difference(self):
        rng = np.random.default_rng(0)
        logits = rng.normal(size=(3, 4))
        labels = np.array([0, 3, 1])
        _, grad = loss_ce(logits, labels)
        h = 1e-6
        numeric = np.zeros_like(logits)
        for idx in np.ndindex(logits.shape):
            up, down = logits.copy(), logits.copy()
            up[idx] += h
            down[idx] -= h
            numeric[idx] = (loss_ce(up, labels)[0] - loss_ce(down, labels)[0]) / (2 * h)
        np.testing.assert_allclose(grad, numeric, rtol=1e-5, atol=1e-9)

    def test_ce_stable_for_large_logits(self):
        value, grad = loss_ce(np.array([[1e4, -1e4, 0.0]]), np.array([0]))
        assert value == 0.0 and np.all(np.isfinite(grad))
        np.testing.assert_allclose(np.exp(log_softmax(np.array([[1e4, 1e4]]))), [[0.5, 0.5]])

    @pytest.mark.parametrize("labels", [np.array([0, 3]), np.array([-1, 0]), np.array([0.5, 1.0])])
    def test_ce_bad_labels(self, labels):
        with pytest.raises(DataError):
            loss_ce(np.zeros((2, 3)), labels)

    def test_ce_accepts_integral_floats(self):
        value, _ = loss_ce(np.zeros((2, 3)), np.array([0.0, 2.0]))
        assert math.isclose(value, math.log(3))


# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
#  Optimizers
# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

class TestSGD:
    def test_zero_learning_rate(self):
        net = build_network("fc:3-4-2", seed=0)
        before = [p.copy() for _, p in net.param_items()]
        sgd_step(net, _grads_like(net), lr=0.0)
        for b, (_, p) in zip(before, net.param_items()):
            np.testing.assert_array_equal(b, p)

    def test_plain_step(self):
        net = build_network("fc:3-2", seed=0)
        w = net.layers[0].weights.copy()
        sgd_step(net, _grads_like(net, 2.0), lr=0.1)
        np.testing.assert_allclose(net.layers[0].weights, w - 0.2)
        np.testing.assert_allclose(net.layers[0].bias, -0.2)

    def test_momentum_recursion(self):
        """Constant g, μ=0.9: the second step moves by lr·g·1.9."""
        net = build_network("fc:3-2", seed=0)
        opt = SGD(net, lr=0.1, momentum=0.9, weight_decay=0.0)
        w0 = net.layers[0].weights.copy()
        opt.step(_grads_like(net))
        w1 = net.layers[0].weights.copy()
        opt.step(_grads_like(net))
        np.testing.assert_allclose(w1 - w0, -0.1)
        np.testing.assert_allclose(net.layers[0].weights - w1, -0.1 * 1.9)

    def test_functional_momentum_with_velocity(self):
        net = build_network("fc:3-2", seed=0)
        velocity = {}
        w0 = net.layers[0].weights.copy()
        sgd_step(net, _grads_like(net), lr=0.1, momentum=0.9, velocity=velocity)
        sgd_step(net, _grads_like(net), lr=0.1, momentum=0.9, velocity=velocity)
        np.testing.assert_allclose(net.layers[0].weights - w0, -0.1 * 2.9)
        assert set(velocity) == {"0.weights", "0.bias"}

    def test_momentum_without_velocity_refused(self):
        net = build_network("fc:3-2", seed=0)
        before = net.layers[0].weights.copy()
        with pytest.raises(ParameterError):
            sgd_step(net, _grads_like(net), lr=0.1, momentum=0.9)
        np.testing.assert_array_equal(net.layers[0].weights, before)

    def test_weight_decay_skips_biases(self):
        net = build_network("fc:3-2", seed=0)
        net.layers[0].bias[...] = 1.0
        w = net.layers[0].weights.copy()
        sgd_step(net, _grads_like(net, 0.0), lr=0.5, weight_decay=0.1)
        np.testing.assert_allclose(net.layers[0].weights, w * (1 - 0.05))
        np.testing.assert_array_equal(net.layers[0].bias, 1.0)

    def test_non_finite_gradient_refused(self):
        net = build_network("fc:3-4-2", seed=0)
        before = [p.copy() for _, p in net.param_items()]
        grads = _grads_like(net)
        grads.layers[1].db[0] = np.nan
        with pytest.raises(NumericError):
            sgd_step(net, grads, lr=0.1)
        for b, (_, p) in zip(before, net.param_items()):
            np.testing.assert_array_equal(b, p)

    def test_mismatched_gradient(self):
        net = build_network("fc:3-2", seed=0)
        grads = GradientSet([LayerGrads(dW=np.zeros((3, 3)), db=np.zeros(2))])
        with pytest.raises(ParameterError):
            sgd_step(net, grads, lr=0.1)

    @pytest.mark.parametrize("kwargs", [{"lr": -1.0}, {"momentum": 1.0}, {"weight_decay": -0.1}])
    def test_bad_hyperparameters(self, kwargs):
        with pytest.raises(ParameterError):
            SGD(build_network("fc:2-2"), **kwargs)


class TestAdamAndSchedule:
    def test_first_adam_step_is_lr_sized(self):
        net = build_network("fc:3-2", seed=0)
        w = net.layers[0].weights.copy()
        Adam(net, lr=0.01).step(_grads_like(net, 5.0))
        np.testing.assert_allclose(net.layers[0].weights, w - 0.01, rtol=1e-6, atol=1e-9)

    def test_cosine_schedule(self):
        assert cosine_lr(0.1, 0, 10) == 0.1
        assert math.isclose(cosine_lr(0.1, 5, 10), 0.05)
        assert cosine_lr(0.1, 9, 10) < cosine_lr(0.1, 8, 10)

    def test_make_optimizer(self):
        net = build_network("fc:2-2")
        assert isinstance(make_optimizer("SGD", net, 0.1, 0.9, 0.0), SGD)
        assert isinstance(make_optimizer("adam", net, 0.1, 0.9, 0.0), Adam)
        with pytest.raises(ParameterError):
            make_optimizer("rmsprop", net, 0.1, 0.9, 0.0)


# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
#  Batch normalization
# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

class TestBatchNorm:
    def test_training_normalizes_per_channel(self):
        x = np.random.default_rng(0).normal(3.0, 2.0, size=(64, 4, 3, 3))
        out = batchnorm_forward(x, BatchNormState.identity(4, epsilon=0.0), training=True)
        np.testing.assert_allclose(out.mean(axis=(0, 2, 3)), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.var(axis=(0, 2, 3)), 1.0, rtol=1e-10)

    def test_running_statistics_momentum(self):
        bn = BatchNormState.identity(2)
        x = np.array([[1.0, 10.0], [3.0, 30.0]])
        batchnorm_forward(x, bn, training=True)
        np.testing.assert_allclose(bn.running_mean, [0.2, 2.0])
        np.testing.assert_allclose(bn.running_var, 0.9 + 0.1 * np.array([1.0, 100.0]))

    def test_eval_uses_running_statistics(self):
        bn = BatchNormState(gamma=np.array([2.0]), beta=np.array([1.0]), running_mean=np.array([3.0]),
                            running_var=np.array([4.0]), epsilon=0.0)
        out = batchnorm_forward(np.array([[5.0], [3.0]]), bn, training=False)
        np.testing.assert_allclose(out, [[3.0], [1.0]])
        assert bn.running_mean[0] == 3.0

    @pytest.mark.parametrize("training", [True, False])
    def test_backward_matches_finite_difference(self, training):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(6, 3))
        upstream = rng.normal(size=(6, 3))
        bn = BatchNormState(gamma=rng.uniform(0.5, 1.5, 3), beta=rng.normal(size=3),
                            running_mean=rng.normal(size=3), running_var=rng.uniform(0.5, 2.0, 3))

        def loss(xv):
            frozen = BatchNormState(bn.gamma, bn.beta, bn.running_mean.copy(), bn.running_var.copy())
            return float(np.sum(batchnorm_forward(xv, frozen, training) * upstream))

        frozen = BatchNormState(bn.gamma, bn.beta, bn.running_mean.copy(), bn.running_var.copy())
        _, cache = batchnorm_forward_cached(x, frozen, training)
        dx, dgamma, dbeta = batchnorm_backward(upstream, bn, cache)
        h = 1e-6
        numeric = np.zeros_like(x)
        for idx in np.ndindex(x.shape):
            up, down = x.copy(), x.copy()
            up[idx] += h
            down[idx] -= h
            numeric[idx] = (loss(up) - loss(down)) / (2 * h)
        np.testing.assert_allclose(dx, numeric, rtol=1e-5, atol=1e-8)
        np.testing.assert_allclose(dbeta, upstream.sum(axis=0))
        np.testing.assert_allclose(dgamma, np.sum(upstream * cache.xhat, axis=0))

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            batchnorm_forward(np.zeros((2, 3)), BatchNormState.identity(4), training=True)


# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
#  Epoch loop
# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

def _blocks(n, seed):
    images, labels = make_images(n, n_classes=4, size=8, seed=seed)
    inputs = normalize(images[:, None, :, :] / 255.0, 0.5, 0.5)
    return Dataset(inputs=inputs, labels=labels.astype(np.int64), name="blocks")


def _cfg(tmp_path, **overrides):
    values = dict(arch="fc:64-16-4", dataset_dir=Path("unused"), out_dir=Path(tmp_path), T=4, epochs=2, batch=16,
                  lr=0.05, momentum=0.9, weight_decay=0.0, seed=3)
    values.update(overrides)
    return TrainConfig(**values)


class TestTrainer:
    def test_fit_history_and_export(self, tmp_path):
        train, test = _blocks(64, 1), _blocks(24, 2)
        cfg = _cfg(tmp_path)
        net = build_network(cfg.arch, (1, 8, 8), cfg.neuron_params(), cfg.T, seed=cfg.seed)
        writer = MetricWriter(tmp_path / "metrics.csv")
        result = fit(net, train, test, cfg, writer)

        history = pd.read_csv(tmp_path / "metrics.csv")
        assert list(history.columns) == METRIC_COLUMNS
        assert len(history) == 2 * 4
        assert set(history["split"]) == {"train", "test"}
        assert set(history["metric"]) == {"loss", "accuracy"}
        assert not result.network.has_bn
        assert result.final == evaluate(result.network, test).metrics

    def test_fit_is_deterministic(self, tmp_path):
        train, test = _blocks(48, 1), _blocks(16, 2)
        histories = []
        for _ in range(2):
            cfg = _cfg(tmp_path, lr_schedule="cosine", bn=True)
            net = build_network(cfg.arch, (1, 8, 8), cfg.neuron_params(), cfg.T, bn=True, seed=cfg.seed)
            histories.append(fit(net, train, test, cfg).history)
        pd.testing.assert_frame_equal(histories[0], histories[1])

    def test_ann_train_mode_runs(self, tmp_path):
        train, test = _blocks(32, 1), _blocks(8, 2)
        cfg = _cfg(tmp_path, train_mode="ann", optimizer="adam", lr=0.01, epochs=1)
        net = build_network(cfg.arch, (1, 8, 8), cfg.neuron_params(), cfg.T, seed=cfg.seed)
        assert "accuracy" in fit(net, train, test, cfg).final

    def test_non_finite_weights_fail_loudly(self, tmp_path):
        train, test = _blocks(16, 1), _blocks(8, 2)
        cfg = _cfg(tmp_path, epochs=1)
        net = build_network(cfg.arch, (1, 8, 8), cfg.neuron_params(), cfg.T, seed=cfg.seed)
        net.layers[0].weights[0, 0] = np.inf
        with pytest.raises(NumericError):
            fit(net, train, test, cfg)

    def test_reconstruction_task(self):
        raw = np.random.default_rng(0).uniform(0, 1, size=(10, 1, 4, 4))
        data = Dataset(inputs=raw, labels=np.zeros(10, dtype=np.int64), targets=raw.reshape(10, -1))
        net = build_network("fc:16-8-16", (1, 4, 4), T=4, seed=0)
        assert infer_task(net) == "reconstruct"
        result = evaluate(net, data)
        assert result.preds is None
        assert math.isclose(result.metrics["mse"], float(np.mean((result.outputs - data.targets) ** 2)))

    def test_classification_metrics(self):
        data = _blocks(20, 5)
        net = build_network("fc:64-4", (1, 8, 8), T=4, seed=0)
        result = evaluate(net, data, batch_size=7)
        assert infer_task(net, data) == "classify"
        assert result.outputs.shape == (20, 4)
        assert result.metrics["accuracy"] == float(np.mean(result.preds == data.labels))
