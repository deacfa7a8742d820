"""Mini-batch training loop shared by the LSTM and Bi-GCN models:
seeded shuffling and initialization, optional class-weighted loss,
early stopping on dev loss with best-parameter restore.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import ValidationError
from ..gradengine import (
    OptimizerState,
    Tensor,
    backward,
    collect_grads,
    optimizer_step,
    zero_grads,
)
from ..ingest import RUMOUR, Thread


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"
    lr: float = 0.01
    weight_decay: float = 0.0
    epsilon: float = 1e-8
    batch_size: int = 16
    max_epochs: int = 30
    patience: int = 5
    class_weights: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValidationError("lr must be positive")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be at least 1")
        if self.patience < 1:
            raise ValidationError("patience must be at least 1")
        if self.max_epochs < 1:
            raise ValidationError("max_epochs must be at least 1")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    dev_loss: float
    dev_accuracy: float


@dataclass(frozen=True)
class FitResult:
    params: dict[str, Tensor]
    history: tuple[EpochRecord, ...]
    best_epoch: int


def _batch_indices(n: int, batch_size: int,
                   order: Optional[np.ndarray] = None) -> list[np.ndarray]:
    index = np.arange(n) if order is None else order
    return [index[at:at + batch_size] for at in range(0, n, batch_size)]


def _evaluate(model, params, data, batch_size: int) -> tuple[float, float]:
    """Weighted-mean loss and accuracy over a dataset, in eval mode."""
    total_loss = 0.0
    correct = 0
    n = len(data)
    for index in _batch_indices(n, batch_size):
        batch = model.slice(data, index)
        loss, labels, _ = model.loss_and_predictions(params, batch, train=False)
        total_loss += loss.item() * len(index)
        truth = batch.targets
        predicted = np.array([1 if label == RUMOUR else 0 for label in labels])
        correct += int((predicted == truth).sum())
    return total_loss / n, correct / n


def _snapshot(params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    return {name: p.values.copy() for name, p in params.items()}


def fit(
    model,
    train_threads: Sequence[Thread],
    dev_threads: Sequence[Thread],
    config: TrainConfig,
) -> FitResult:
    """Train a gradient model, restoring the parameters of the epoch with
    the lowest dev loss. Fully deterministic for a given config."""
    if not train_threads or not dev_threads:
        raise ValidationError("train and dev sets must both be non-empty")
    rng = np.random.default_rng(config.seed)
    params = model.init_params(rng)
    train_data = model.prepare(train_threads)
    dev_data = model.prepare(dev_threads)
    state = OptimizerState(
        kind=config.optimizer, lr=config.lr,
        weight_decay=config.weight_decay, epsilon=config.epsilon,
    )
    history: list[EpochRecord] = []
    best_loss = np.inf
    best_params = _snapshot(params)
    best_epoch = 0
    bad_epochs = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_data))
        for batch_no, index in enumerate(
                _batch_indices(len(train_data), config.batch_size, order), start=1):
            batch = model.slice(train_data, index)
            zero_grads(params.values())
            loss, _, _ = model.loss_and_predictions(params, batch, train=True, rng=rng)
            if not np.isfinite(loss.item()):
                raise ValidationError(
                    f"training diverged: non-finite loss at epoch {epoch}, "
                    f"batch {batch_no}"
                )
            backward(loss)
            optimizer_step(state, params, collect_grads(params))
        train_loss, train_acc = _evaluate(model, params, train_data, config.batch_size)
        dev_loss, dev_acc = _evaluate(model, params, dev_data, config.batch_size)
        history.append(EpochRecord(
            epoch=epoch, train_loss=train_loss, train_accuracy=train_acc,
            dev_loss=dev_loss, dev_accuracy=dev_acc,
        ))
        if dev_loss < best_loss:
            best_loss = dev_loss
            best_params = _snapshot(params)
            best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break
    for name, param in params.items():
        param.values = best_params[name]
    return FitResult(params=params, history=tuple(history), best_epoch=best_epoch)


def predict_threads(model, params: dict[str, Tensor],
                    threads: Sequence[Thread],
                    batch_size: int = 64) -> tuple[list[str], np.ndarray]:
    """Labels and scores for threads under a trained gradient model."""
    data = model.prepare(threads)
    labels: list[str] = []
    scores: list[float] = []
    for index in _batch_indices(len(data), batch_size):
        batch = model.slice(data, index)
        _, batch_labels, batch_scores = model.loss_and_predictions(
            params, batch, train=False)
        labels.extend(batch_labels)
        scores.extend(batch_scores)
    return labels, np.array(scores)
