"""Propagation trees over reply threads and their graph-batch form.

A tree stores the source tweet at index 1 and replies at 2..n in
creation order; with the default depth-one construction every reply's
parent is node 1. Trees serialize to a tab-separated text block (header
``thread_id<TAB>label``, then ``parent<TAB>index<TAB>i:v i:v ...`` per
node) and concatenate into a corpus file introduced by a version line.

Graph batches carry one normalized adjacency operator per direction.
The raw edge sets are directed (top-down parent->child; bottom-up the
transpose), while normalization treats each surviving edge as a
symmetric link with self-loops: A_hat = D^{-1/2} (A + A^T + I) D^{-1/2},
which keeps the operator symmetric. DropEdge removes raw edges (never
self-loops) with one Bernoulli draw per edge shared by both directions,
then renormalizes on the surviving support.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ParseError, ValidationError
from .featurize import SparseVector, TfidfModel, transform_tfidf
from .gradengine.sparse import SparseMatrix
from .ingest import LABELS, Thread
from .textproc import normalize, tokenize

TREE_FORMAT_VERSION = "rumourlab-tree v1"


@dataclass(frozen=True)
class PropNode:
    index: int
    parent: Optional[int]
    features: SparseVector

    def __post_init__(self):
        if self.index < 1:
            raise ValidationError(f"node index {self.index} must be >= 1")
        if self.parent is not None and not 1 <= self.parent < self.index:
            raise ValidationError(
                f"node {self.index} parent {self.parent} must precede it"
            )


@dataclass(frozen=True)
class PropTree:
    thread_id: str
    label: Optional[str]
    nodes: tuple[PropNode, ...]

    def __post_init__(self):
        if not self.nodes:
            raise ValidationError("a tree needs at least its source node")
        for position, node in enumerate(self.nodes, start=1):
            if node.index != position:
                raise ValidationError(
                    f"tree {self.thread_id}: node indices not contiguous at {node.index}"
                )
        if self.nodes[0].parent is not None:
            raise ValidationError(f"tree {self.thread_id}: source node has a parent")
        for node in self.nodes[1:]:
            if node.parent is None:
                raise ValidationError(
                    f"tree {self.thread_id}: non-source node {node.index} lacks a parent"
                )
        if self.label is not None and self.label not in LABELS:
            raise ValidationError(f"tree {self.thread_id}: unknown label {self.label!r}")

    @property
    def size(self) -> int:
        return len(self.nodes)

    def edges(self) -> list[tuple[int, int]]:
        """Directed (parent, child) pairs using 1-based node indices."""
        return [(node.parent, node.index) for node in self.nodes[1:]]


def build_tree(
    thread: Thread,
    model: TfidfModel,
    keep_reply_links: bool = False,
    raw_counts: bool = False,
) -> PropTree:
    """Tree for a thread with TF-IDF node features.

    By default every reply attaches to the source. With keep_reply_links
    a reply whose parent_id names an earlier tweet in the thread keeps
    that link; anything else still attaches to the source. raw_counts
    stores plain term counts instead of tf-idf (ablation mode).
    """
    tweets = thread.tweets()
    position = {tweet.id: i + 1 for i, tweet in enumerate(tweets)}
    nodes = []
    for i, tweet in enumerate(tweets):
        features = transform_tfidf(model, tokenize(normalize(tweet.text)),
                                   use_raw_counts=raw_counts)
        if i == 0:
            parent = None
        elif keep_reply_links and tweet.parent_id in position \
                and position[tweet.parent_id] < i + 1:
            parent = position[tweet.parent_id]
        else:
            parent = 1
        nodes.append(PropNode(index=i + 1, parent=parent, features=features))
    return PropTree(thread_id=thread.id, label=thread.label, nodes=tuple(nodes))


def serialize_tree(tree: PropTree) -> str:
    """Text block for one tree; feature values print to 12 significant
    digits."""
    lines = [f"{tree.thread_id}\t{tree.label if tree.label else 'None'}"]
    for node in tree.nodes:
        pairs = " ".join(f"{i}:{v:.12g}" for i, v in node.features.entries)
        parent = "None" if node.parent is None else str(node.parent)
        lines.append(f"{parent}\t{node.index}\t{pairs}")
    return "\n".join(lines)


def parse_tree(block: str) -> PropTree:
    """Inverse of serialize_tree, up to float printing precision."""
    lines = block.strip("\n").split("\n")
    if not lines or not lines[0].strip():
        raise ParseError("empty tree block")
    header = lines[0].split("\t")
    if len(header) != 2:
        raise ParseError("line 1: tree header must be thread_id<TAB>label")
    thread_id, label_text = header
    label = None if label_text == "None" else label_text
    nodes = []
    for line_no, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(f"line {line_no}: node line must have three tab-separated fields")
        parent_text, index_text, pairs_text = parts
        try:
            index = int(index_text)
            parent = None if parent_text == "None" else int(parent_text)
        except ValueError:
            raise ParseError(f"line {line_no}: bad parent or index field") from None
        entries = []
        for pair in pairs_text.split():
            left, sep, right = pair.partition(":")
            try:
                if not sep:
                    raise ValueError
                entries.append((int(left), float(right)))
            except ValueError:
                raise ParseError(
                    f"line {line_no}: bad index:value pair {pair!r}"
                ) from None
        nodes.append(PropNode(index=index, parent=parent,
                              features=SparseVector(entries=tuple(entries))))
    return PropTree(thread_id=thread_id, label=label, nodes=tuple(nodes))


def write_tree_corpus(trees: Sequence[PropTree], path) -> None:
    blocks = [serialize_tree(tree) for tree in trees]
    text = f"# {TREE_FORMAT_VERSION}\n" + "\n\n".join(blocks) + "\n"
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)


def read_tree_corpus(path) -> list[PropTree]:
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    lines = text.splitlines()
    if not lines or lines[0] != f"# {TREE_FORMAT_VERSION}":
        raise ParseError(f"{path}: missing '# {TREE_FORMAT_VERSION}' header")
    trees = []
    block: list[str] = []
    for line in lines[1:] + [""]:
        if line.strip():
            block.append(line)
        elif block:
            trees.append(parse_tree("\n".join(block)))
            block = []
    return trees


@dataclass(frozen=True)
class GraphBatch:
    """Stacked trees: dense node features, the two normalized adjacency
    operators, per-node graph membership, and each graph's root row."""

    features: np.ndarray
    td_adjacency: SparseMatrix
    bu_adjacency: SparseMatrix
    graph_membership: np.ndarray
    root_index: np.ndarray
    td_edges: np.ndarray  # raw directed (parent, child) global node pairs

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def n_graphs(self) -> int:
        return len(self.root_index)

    @property
    def bu_edges(self) -> np.ndarray:
        return self.td_edges[:, ::-1] if len(self.td_edges) else self.td_edges


def _normalized_adjacency(n_nodes: int, edges: np.ndarray) -> SparseMatrix:
    """Symmetric normalization with self-loops over the edge support."""
    degree = np.ones(n_nodes)
    for u, v in edges:
        degree[u] += 1.0
        degree[v] += 1.0
    inv_sqrt = 1.0 / np.sqrt(degree)
    rows = list(range(n_nodes))
    cols = list(range(n_nodes))
    vals = [inv_sqrt[i] * inv_sqrt[i] for i in range(n_nodes)]
    for u, v in edges:
        rows.extend((u, v))
        cols.extend((v, u))
        weight = inv_sqrt[u] * inv_sqrt[v]
        vals.extend((weight, weight))
    return SparseMatrix(
        shape=(n_nodes, n_nodes),
        rows=np.array(rows, dtype=int),
        cols=np.array(cols, dtype=int),
        vals=np.array(vals, dtype=np.float64),
    )


def _batch_from_edges(
    features: np.ndarray,
    td_edges: np.ndarray,
    membership: np.ndarray,
    roots: np.ndarray,
) -> GraphBatch:
    n_nodes = features.shape[0]
    td = _normalized_adjacency(n_nodes, td_edges)
    bu_edges = td_edges[:, ::-1] if len(td_edges) else td_edges
    bu = _normalized_adjacency(n_nodes, bu_edges)
    return GraphBatch(
        features=features,
        td_adjacency=td,
        bu_adjacency=bu,
        graph_membership=membership,
        root_index=roots,
        td_edges=td_edges,
    )


def to_graph_batch(trees: Sequence[PropTree], vocab_size: int) -> GraphBatch:
    """Stack trees into one batch with global node numbering."""
    if not trees:
        raise ValidationError("cannot batch zero trees")
    total = sum(tree.size for tree in trees)
    features = np.zeros((total, vocab_size))
    membership = np.zeros(total, dtype=int)
    roots = np.zeros(len(trees), dtype=int)
    edges: list[tuple[int, int]] = []
    offset = 0
    for g, tree in enumerate(trees):
        roots[g] = offset
        for node in tree.nodes:
            row = offset + node.index - 1
            membership[row] = g
            for index, value in node.features.entries:
                if index >= vocab_size:
                    raise ValidationError(
                        f"tree {tree.thread_id}: feature index {index} "
                        f">= vocab size {vocab_size}"
                    )
                features[row, index] = value
        edges.extend(
            (offset + parent - 1, offset + child - 1) for parent, child in tree.edges()
        )
        offset += tree.size
    td_edges = np.array(edges, dtype=int).reshape(-1, 2)
    return _batch_from_edges(features, td_edges, membership, roots)


def drop_edge(batch: GraphBatch, rate: float, seed: int) -> GraphBatch:
    """Remove each raw edge with probability `rate` (one draw covers the
    edge in both directions), then renormalize. Self-loops are part of
    normalization, never dropped. Rate 0 returns the batch unchanged."""
    if not 0.0 <= rate < 1.0:
        raise ValidationError(f"drop rate must be in [0, 1), got {rate}")
    if rate == 0.0 or len(batch.td_edges) == 0:
        return batch
    rng = np.random.default_rng(seed)
    keep = rng.random(len(batch.td_edges)) >= rate
    return _batch_from_edges(
        batch.features, batch.td_edges[keep], batch.graph_membership, batch.root_index
    )
