"""
tandemnet — Trainer
Epoch loop for tandem learning:

    shuffle → encode → forward_tandem → loss → backward_tandem → optimizer step

After every epoch the network is exported (BN folded, f32 weights) and scored
on the test split with pure SNN inference, so the last test metric is exactly
what the saved checkpoint reproduces.
"""

import time
from dataclasses import dataclass

import numpy as np
import pandas as pd

import config
from analytics.scoring import accuracy, mse
from data_ingestion.batching import Dataset, batch_targets, encode_batch, sequential_batches, shuffle_batches
from data_ingestion.run_config import TrainConfig
from tandem.codec import predict
from tandem.errors import NumericError
from tandem.losses import loss_ce, loss_mse
from tandem.network import TandemNetwork, backward_tandem, export_inference, forward_tandem, inference_snn
from tandem.optim import cosine_lr, make_optimizer
from utils.export import MetricWriter
from utils.logging_config import get_logger

log = get_logger("trainer")


@dataclass
class EvalResult:
    metrics: dict
    outputs: np.ndarray
    preds: np.ndarray | None
    labels: np.ndarray


@dataclass
class FitResult:
    history: pd.DataFrame
    network: TandemNetwork          # exported inference copy after the last epoch
    final: dict


def infer_task(network: TandemNetwork, dataset: Dataset | None = None) -> str:
    """Reconstruction when the data carries targets or the output is as wide as the input."""
    if dataset is not None and dataset.targets is not None:
        return "reconstruct"
    if network.output_size == int(np.prod(network.input_shape)):
        return "reconstruct"
    return "classify"


def run_inference(network: TandemNetwork, dataset: Dataset, batch_size: int = config.EVAL_BATCH) -> np.ndarray:
    outs = [inference_snn(network, encode_batch(dataset, idx, network.T))
            for idx in sequential_batches(len(dataset), batch_size)]
    return np.concatenate(outs, axis=0)


def evaluate(network: TandemNetwork, dataset: Dataset, task: str | None = None,
             batch_size: int = config.EVAL_BATCH) -> EvalResult:
    """Score a folded network with SNN-only inference."""
    task = task or infer_task(network, dataset)
    outputs = run_inference(network, dataset, batch_size)
    if task == "reconstruct":
        target = dataset.targets if dataset.targets is not None else dataset.inputs.reshape(len(dataset), -1)
        value = mse(outputs, target)
        return EvalResult(metrics={"loss": value, "mse": value}, outputs=outputs, preds=None, labels=dataset.labels)
    preds = predict(outputs)
    loss, _ = loss_ce(outputs, dataset.labels)
    return EvalResult(metrics={"loss": loss, "accuracy": accuracy(preds, dataset.labels)},
                      outputs=outputs, preds=preds, labels=dataset.labels)


def train_epoch(network: TandemNetwork, dataset: Dataset, optimizer, task: str, batch_size: int,
                seed: int, mode: str = "tandem") -> dict:
    loss_fn = loss_mse if task == "reconstruct" else loss_ce
    total_loss, correct, seen = 0.0, 0, 0
    for idx in shuffle_batches(len(dataset), batch_size, seed):
        trace = forward_tandem(network, encode_batch(dataset, idx, network.T), mode=mode,
                               training=True, keep_spikes=False)
        loss, grad = loss_fn(trace.output, batch_targets(dataset, idx))
        if not np.isfinite(loss):
            raise NumericError(f"non-finite training loss ({loss})")
        optimizer.step(backward_tandem(network, trace, grad))
        total_loss += loss * len(idx)
        seen += len(idx)
        if task == "classify":
            correct += int(np.sum(predict(trace.output) == dataset.labels[idx]))
    metrics = {"loss": total_loss / max(seen, 1)}
    if task == "classify":
        metrics["accuracy"] = correct / max(seen, 1)
    else:
        metrics["mse"] = metrics["loss"]
    return metrics


def fit(network: TandemNetwork, train_set: Dataset, test_set: Dataset, cfg: TrainConfig,
        writer: MetricWriter | None = None) -> FitResult:
    writer = writer or MetricWriter()
    task = cfg.task
    optimizer = make_optimizer(cfg.optimizer, network, cfg.lr, cfg.momentum, cfg.weight_decay)
    log.info("Training %s (%s, T=%d, %s) on %d samples for %d epochs",
             cfg.arch, network.layers[0].neuron.kind.value, network.T, cfg.train_mode, len(train_set), cfg.epochs)

    exported, test_metrics = None, {}
    for epoch in range(cfg.epochs):
        start = time.time()
        if cfg.lr_schedule == "cosine":
            optimizer.lr = cosine_lr(cfg.lr, epoch, cfg.epochs)
        train_metrics = train_epoch(network, train_set, optimizer, task, cfg.batch, cfg.seed + epoch, cfg.train_mode)
        exported = export_inference(network)
        test_metrics = evaluate(exported, test_set, task).metrics
        for split, metrics in (("train", train_metrics), ("test", test_metrics)):
            for name, value in metrics.items():
                writer.add(epoch + 1, split, name, value)
        writer.flush()
        headline = "accuracy" if task == "classify" else "mse"
        log.info("Epoch %d/%d  train loss %.5f  test %s %.5f  (%.1fs)", epoch + 1, cfg.epochs,
                 train_metrics["loss"], headline, test_metrics[headline], time.time() - start)

    return FitResult(history=writer.frame(), network=exported, final=test_metrics)
