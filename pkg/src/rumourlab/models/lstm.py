"""Sequence classifier: embedding, one masked LSTM layer, a relu
perceptron layer, and a sigmoid rumour-probability output.

Masked timesteps propagate both the hidden and cell state unchanged, so
appending padding to an example never alters its output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import ValidationError
from ..featurize import Vocabulary
from ..gradengine import (
    Tensor,
    bce_loss,
    gather_rows,
    mask_mul,
    matmul,
    parameter,
    relu,
    sigmoid,
    tanh,
)
from ..ingest import NONRUMOUR, RUMOUR, Thread
from .data import labels01, lstm_inputs
from .init import xavier_uniform

GATES = ("i", "f", "o", "c")


@dataclass(frozen=True)
class LstmConfig:
    vocab_cap: int = 20_000
    embed_dim: int = 64
    hidden_dim: int = 128
    perceptron_dim: int = 64
    max_len: int = 128
    dropout: float = 0.0

    def __post_init__(self):
        if min(self.vocab_cap, self.embed_dim, self.hidden_dim,
               self.perceptron_dim, self.max_len) <= 0:
            raise ValidationError("all LSTM dimensions must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError("dropout must be in [0, 1)")


@dataclass(frozen=True)
class LstmBatch:
    ids: np.ndarray
    mask: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)


class LstmModel:
    """Model wiring plus dataset preparation for the shared trainer."""

    kind = "lstm"

    def __init__(self, config: LstmConfig, vocab: Vocabulary,
                 class_weights: Optional[dict[str, float]] = None):
        self.config = config
        self.vocab = vocab
        self.class_weights = class_weights

    def init_params(self, rng: np.random.Generator) -> dict[str, Tensor]:
        cfg = self.config
        if self.vocab.size > cfg.vocab_cap:
            raise ValidationError(
                f"vocabulary of {self.vocab.size} ids (terms plus reserved) "
                f"exceeds vocab_cap {cfg.vocab_cap}"
            )
        params = {
            "embed": parameter(
                xavier_uniform(rng, (self.vocab.size, cfg.embed_dim)), "embed"),
        }
        for gate in GATES:
            params[f"w_x{gate}"] = parameter(
                xavier_uniform(rng, (cfg.embed_dim, cfg.hidden_dim)), f"w_x{gate}")
            params[f"w_h{gate}"] = parameter(
                xavier_uniform(rng, (cfg.hidden_dim, cfg.hidden_dim)), f"w_h{gate}")
            bias = np.ones((1, cfg.hidden_dim)) if gate == "f" else np.zeros((1, cfg.hidden_dim))
            params[f"b_{gate}"] = parameter(bias, f"b_{gate}")
        params["w_perc"] = parameter(
            xavier_uniform(rng, (cfg.hidden_dim, cfg.perceptron_dim)), "w_perc")
        params["b_perc"] = parameter(np.zeros((1, cfg.perceptron_dim)), "b_perc")
        params["w_out"] = parameter(
            xavier_uniform(rng, (cfg.perceptron_dim, 1)), "w_out")
        params["b_out"] = parameter(np.zeros((1, 1)), "b_out")
        return params

    def prepare(self, threads: Sequence[Thread]) -> LstmBatch:
        ids, mask = lstm_inputs(threads, self.vocab, self.config.max_len)
        return LstmBatch(ids=ids, mask=mask, targets=labels01(threads))

    def slice(self, data: LstmBatch, index: np.ndarray) -> LstmBatch:
        return LstmBatch(ids=data.ids[index], mask=data.mask[index],
                         targets=data.targets[index])

    def forward(self, params: dict[str, Tensor], ids: np.ndarray, mask: np.ndarray,
                train: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
        """Rumour probability per row, shape (batch, 1)."""
        vocab_rows = params["embed"].shape[0]
        if ids.max(initial=0) >= vocab_rows:
            raise ValidationError(
                f"token id {ids.max()} out of range for vocabulary of {vocab_rows}"
            )
        batch, steps = ids.shape
        hidden = Tensor(np.zeros((batch, self.config.hidden_dim)))
        cell = Tensor(np.zeros((batch, self.config.hidden_dim)))
        # Steps past every row's prefix leave the state untouched; skip them.
        last_active = int(mask.sum(axis=1).max()) if batch else 0
        for t in range(last_active):
            x = gather_rows(params["embed"], ids[:, t])
            gates = {}
            for gate in GATES:
                pre = matmul(x, params[f"w_x{gate}"]) \
                    + matmul(hidden, params[f"w_h{gate}"]) + params[f"b_{gate}"]
                gates[gate] = tanh(pre) if gate == "c" else sigmoid(pre)
            new_cell = gates["f"] * cell + gates["i"] * gates["c"]
            new_hidden = gates["o"] * tanh(new_cell)
            step_mask = mask[:, t:t + 1]
            cell = mask_mul(new_cell, step_mask) + mask_mul(cell, 1.0 - step_mask)
            hidden = mask_mul(new_hidden, step_mask) + mask_mul(hidden, 1.0 - step_mask)
        z = relu(matmul(hidden, params["w_perc"]) + params["b_perc"])
        if train and self.config.dropout > 0.0:
            keep = 1.0 - self.config.dropout
            drop = (rng.random(z.shape) < keep) / keep
            z = mask_mul(z, drop)
        return sigmoid(matmul(z, params["w_out"]) + params["b_out"])

    def loss_and_predictions(self, params, batch: LstmBatch, train: bool,
                             rng: Optional[np.random.Generator] = None):
        probs = self.forward(params, batch.ids, batch.mask, train=train, rng=rng)
        weights = None
        if self.class_weights is not None:
            lookup = np.array([self.class_weights[NONRUMOUR], self.class_weights[RUMOUR]])
            weights = lookup[batch.targets][:, None]
        loss = bce_loss(probs, batch.targets[:, None].astype(float), weights)
        scores = probs.values[:, 0]
        labels = [RUMOUR if s >= 0.5 else NONRUMOUR for s in scores]
        return loss, labels, scores
