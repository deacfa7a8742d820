"""Two-direction graph-convolution classifier over propagation trees.

Each direction (top-down, bottom-up) runs two convolution layers with
its own weights; after every layer each node's output is concatenated
with its graph root's output from the same layer. Per-graph mean pooling
of both directions feeds one affine layer and a row softmax over the
(rumour, nonrumour) pair.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import ValidationError
from ..featurize import TfidfModel
from ..gradengine import (
    Tensor,
    concat,
    gather_rows,
    mask_mul,
    matmul,
    parameter,
    relu,
    segment_mean,
    softmax_rows,
    spmm,
    weighted_ce_loss,
)
from ..ingest import NONRUMOUR, RUMOUR, Thread
from ..proptree import GraphBatch, PropTree, build_tree, drop_edge, to_graph_batch
from .data import labels01
from .init import xavier_uniform

DIRECTIONS = ("td", "bu")
CLASS_ORDER = (RUMOUR, NONRUMOUR)


@dataclass(frozen=True)
class BiGcnConfig:
    input_dim: int = 5000
    hidden_dim: int = 64
    out_dim: int = 64
    drop_edge_rate: float = 0.2
    dropout: float = 0.0
    tree_raw_counts: bool = False
    keep_reply_links: bool = False

    def __post_init__(self):
        if min(self.input_dim, self.hidden_dim, self.out_dim) <= 0:
            raise ValidationError("all Bi-GCN dimensions must be positive")
        if not 0.0 <= self.drop_edge_rate < 1.0:
            raise ValidationError("drop_edge_rate must be in [0, 1)")
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError("dropout must be in [0, 1)")


@dataclass(frozen=True)
class TreeData:
    trees: tuple[PropTree, ...]
    targets: np.ndarray

    def __len__(self) -> int:
        return len(self.trees)


class BiGcnModel:
    kind = "bigcn"

    def __init__(self, config: BiGcnConfig, tfidf: TfidfModel,
                 class_weights: Optional[dict[str, float]] = None):
        self.config = config
        self.tfidf = tfidf
        self.class_weights = class_weights

    def init_params(self, rng: np.random.Generator) -> dict[str, Tensor]:
        cfg = self.config
        params: dict[str, Tensor] = {}
        for direction in DIRECTIONS:
            params[f"{direction}_w1"] = parameter(
                xavier_uniform(rng, (cfg.input_dim, cfg.hidden_dim)), f"{direction}_w1")
            params[f"{direction}_w2"] = parameter(
                xavier_uniform(rng, (2 * cfg.hidden_dim, cfg.out_dim)), f"{direction}_w2")
        params["cls_w"] = parameter(
            xavier_uniform(rng, (4 * cfg.out_dim, 2)), "cls_w")
        params["cls_b"] = parameter(np.zeros((1, 2)), "cls_b")
        return params

    def prepare(self, threads: Sequence[Thread]) -> TreeData:
        trees = tuple(
            build_tree(thread, self.tfidf,
                       keep_reply_links=self.config.keep_reply_links,
                       raw_counts=self.config.tree_raw_counts)
            for thread in threads
        )
        return TreeData(trees=trees, targets=labels01(threads))

    def slice(self, data: TreeData, index: np.ndarray) -> TreeData:
        return TreeData(trees=tuple(data.trees[i] for i in index),
                        targets=data.targets[index])

    def forward(self, params: dict[str, Tensor], batch: GraphBatch,
                train: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
        """Per-graph class probabilities, columns (rumour, nonrumour)."""
        cfg = self.config
        if batch.features.shape[1] != cfg.input_dim:
            raise ValidationError(
                f"batch features have {batch.features.shape[1]} columns, "
                f"model expects {cfg.input_dim}"
            )
        features = Tensor(batch.features)
        root_of_node = batch.root_index[batch.graph_membership]
        pooled = []
        for direction, adjacency in (("td", batch.td_adjacency),
                                     ("bu", batch.bu_adjacency)):
            h1 = relu(spmm(adjacency, matmul(features, params[f"{direction}_w1"])))
            if train and cfg.dropout > 0.0:
                keep = 1.0 - cfg.dropout
                h1 = mask_mul(h1, (rng.random(h1.shape) < keep) / keep)
            h1 = concat([h1, gather_rows(h1, root_of_node)])
            h2 = relu(spmm(adjacency, matmul(h1, params[f"{direction}_w2"])))
            h2 = concat([h2, gather_rows(h2, root_of_node)])
            pooled.append(segment_mean(h2, batch.graph_membership, batch.n_graphs))
        representation = concat(pooled)
        logits = matmul(representation, params["cls_w"]) + params["cls_b"]
        return softmax_rows(logits)

    def loss_and_predictions(self, params, data: TreeData, train: bool,
                             rng: Optional[np.random.Generator] = None):
        batch = to_graph_batch(data.trees, self.config.input_dim)
        if train and self.config.drop_edge_rate > 0.0:
            batch = drop_edge(batch, self.config.drop_edge_rate,
                              seed=int(rng.integers(2 ** 63)))
        probs = self.forward(params, batch, train=train, rng=rng)
        # Targets are 1 for rumour; probability columns are (rumour, nonrumour).
        column = 1 - data.targets
        weights = None
        if self.class_weights is not None:
            weights = np.array([self.class_weights[c] for c in CLASS_ORDER])
        loss = weighted_ce_loss(probs, column, weights)
        scores = probs.values[:, 0]
        labels = [CLASS_ORDER[i] for i in np.argmax(probs.values, axis=1)]
        return loss, labels, scores
