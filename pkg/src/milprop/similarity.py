"""Pairwise instance similarity: w(i, j) = exp(-gamma * ||x_i - x_j||^2).

Graphs are built either dense (every off-diagonal pair) or kNN-sparsified
(each node keeps its k nearest neighbours, then the edge set is symmetrized
by union). Self-pairs are never stored: they contribute nothing to the
smoothness penalty. Edges whose weight underflows to exactly 0.0 are dropped
for the same reason, which keeps every stored weight inside (0, 1].

A built graph is immutable and safe to read concurrently. Construction of the
kNN neighbour lists can be partitioned across worker threads.
"""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .data import Dataset


class GraphCacheError(Exception):
    """A cache file does not match the requesting dataset or config."""


@dataclass(frozen=True)
class SimilarityConfig:
    """Bandwidth and sparsification knobs for graph construction.

    ``gamma`` multiplies the squared Euclidean distance; 1.0 reproduces the
    plain exp(-||.||^2) kernel. ``knn``, when set, keeps k nearest neighbours
    per node (ties broken by lexicographic instance id).
    """

    gamma: float = 1.0
    knn: int | None = None
    cache: bool = False

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.knn is not None and self.knn < 1:
            raise ValueError(f"knn must be >= 1, got {self.knn}")


@dataclass(frozen=True, eq=False)
class SimilarityGraph:
    """Symmetric weighted graph over an ordered id scope.

    Each unordered edge is stored once with ``rows[k] < cols[k]`` (indices
    into ``ids``); symmetry is implied. Weights lie in (0, 1].
    """

    ids: tuple[str, ...]
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray

    @property
    def num_instances(self) -> int:
        return len(self.ids)

    @property
    def n_edges(self) -> int:
        return int(self.rows.size)

    @cached_property
    def _edge_index(self) -> dict[tuple[int, int], float]:
        return {
            (int(i), int(j)): float(w)
            for i, j, w in zip(self.rows, self.cols, self.weights)
        }

    def weight(self, id_i: str, id_j: str) -> float:
        """Stored weight between two ids, 0.0 if the edge is absent."""
        index = {id_: k for k, id_ in enumerate(self.ids)}
        i, j = index[id_i], index[id_j]
        if i == j:
            return 0.0
        return self._edge_index.get((min(i, j), max(i, j)), 0.0)

    def to_dense(self) -> np.ndarray:
        """Symmetric dense matrix with zero diagonal (small graphs only)."""
        n = self.num_instances
        dense = np.zeros((n, n))
        dense[self.rows, self.cols] = self.weights
        dense[self.cols, self.rows] = self.weights
        return dense


def similarity(xi: np.ndarray, xj: np.ndarray, gamma: float = 1.0) -> float:
    """exp(-gamma * ||xi - xj||^2); symmetric, in (0, 1], 1 iff xi == xj."""
    xi = np.asarray(xi, dtype=np.float64)
    xj = np.asarray(xj, dtype=np.float64)
    if xi.shape != xj.shape:
        raise ValueError(f"dimension mismatch: {xi.shape} vs {xj.shape}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    delta = xi - xj
    return float(np.exp(-gamma * float(np.dot(delta, delta))))


def _resolve_scope(dataset: Dataset, scope: Iterable[str] | None) -> tuple[str, ...]:
    if scope is None:
        return tuple(inst.id for inst in dataset.instances)
    scope = list(scope)
    wanted = set(scope)
    if len(wanted) != len(scope):
        # deduplicate but keep first-occurrence order
        seen: set[str] = set()
        scope = [s for s in scope if not (s in seen or seen.add(s))]
    for s in scope:
        dataset.instance(s)  # raises UnresolvedMember on unknown ids
    return tuple(scope)


def _knn_edges(
    sqdist: np.ndarray, ids: Sequence[str], k: int, workers: int
) -> set[tuple[int, int]]:
    """Union-symmetrized kNN edge set; ties broken by lexicographic id."""
    n = sqdist.shape[0]
    lex_rank = np.empty(n, dtype=np.int64)
    lex_rank[np.argsort(np.array(ids))] = np.arange(n)

    def nearest(i: int) -> list[tuple[int, int]]:
        order = np.lexsort((lex_rank, sqdist[i]))
        picked = [int(j) for j in order if j != i][:k]
        return [(min(i, j), max(i, j)) for j in picked]

    edges: set[tuple[int, int]] = set()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for pairs in pool.map(nearest, range(n)):
                edges.update(pairs)
    else:
        for i in range(n):
            edges.update(nearest(i))
    return edges


def build_graph(
    dataset: Dataset,
    config: SimilarityConfig,
    scope: Iterable[str] | None = None,
    workers: int = 1,
) -> SimilarityGraph:
    """Build the similarity graph over ``scope`` (default: all instances).

    Scope order is preserved when a sequence is given. With ``config.knn``
    set, each node keeps edges to its k nearest neighbours by Euclidean
    distance and the edge set is symmetrized by union; weights on surviving
    edges equal the dense ones.
    """
    ids = _resolve_scope(dataset, scope)
    n = len(ids)
    X = np.stack([dataset.instance(i).features for i in ids])

    if config.knn is not None and config.knn >= n:
        raise ValueError(f"knn={config.knn} must be < scope size {n}")

    if n == 1:
        empty = np.empty(0, dtype=np.int64)
        return SimilarityGraph(ids, empty, empty, np.empty(0))

    sq = pdist(X, metric="sqeuclidean")
    if config.knn is None:
        rows, cols = np.triu_indices(n, k=1)
        weights = np.exp(-config.gamma * sq)
    else:
        sqdist = squareform(sq)
        edges = sorted(_knn_edges(sqdist, ids, config.knn, workers))
        rows = np.array([e[0] for e in edges], dtype=np.int64)
        cols = np.array([e[1] for e in edges], dtype=np.int64)
        weights = np.exp(-config.gamma * sqdist[rows, cols])

    keep = weights > 0.0  # drop edges that underflowed; they are inert
    return SimilarityGraph(
        ids,
        rows[keep].astype(np.int64),
        cols[keep].astype(np.int64),
        weights[keep],
    )


def subgraph(graph: SimilarityGraph, ids: Sequence[str]) -> SimilarityGraph:
    """Induced subgraph on ``ids`` (must be a subset of the graph scope)."""
    ids = tuple(ids)
    position = {id_: k for k, id_ in enumerate(graph.ids)}
    missing = [i for i in ids if i not in position]
    if missing:
        raise ValueError(f"ids not in graph scope: {missing[:5]}")
    new_index = np.full(graph.num_instances, -1, dtype=np.int64)
    for k, id_ in enumerate(ids):
        new_index[position[id_]] = k
    ri = new_index[graph.rows]
    ci = new_index[graph.cols]
    keep = (ri >= 0) & (ci >= 0)
    rows = np.minimum(ri[keep], ci[keep])
    cols = np.maximum(ri[keep], ci[keep])
    order = np.lexsort((cols, rows))
    return SimilarityGraph(ids, rows[order], cols[order], graph.weights[keep][order])


def dataset_fingerprint(dataset: Dataset) -> str:
    """Content hash of instance ids and feature bytes, for cache staleness."""
    h = hashlib.sha256()
    h.update(str(dataset.dim).encode())
    for inst in dataset.instances:
        h.update(inst.id.encode())
        h.update(inst.features.tobytes())
    return h.hexdigest()


def save_graph_cache(
    path: str, graph: SimilarityGraph, config: SimilarityConfig, dataset: Dataset
) -> None:
    """Write a graph cache: a JSON header line, then one edge per line."""
    header = {
        "format": "milprop-graph",
        "version": 1,
        "gamma": config.gamma,
        "knn": config.knn,
        "dataset_sha256": dataset_fingerprint(dataset),
        "ids": list(graph.ids),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for i, j, w in zip(graph.rows, graph.cols, graph.weights):
            fh.write(f"{int(i)} {int(j)} {float(w)!r}\n")


def load_graph_cache(
    path: str, dataset: Dataset, config: SimilarityConfig
) -> SimilarityGraph:
    """Load a cached graph, rejecting stale hashes or mismatched configs."""
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != "milprop-graph" or header.get("version") != 1:
            raise GraphCacheError(f"{path}: not a version-1 graph cache")
        if header.get("gamma") != config.gamma or header.get("knn") != config.knn:
            raise GraphCacheError(
                f"{path}: cached for gamma={header.get('gamma')}, "
                f"knn={header.get('knn')}; requested gamma={config.gamma}, "
                f"knn={config.knn}"
            )
        if header.get("dataset_sha256") != dataset_fingerprint(dataset):
            raise GraphCacheError(f"{path}: stale dataset content hash")
        ids = tuple(header["ids"])
        rows, cols, weights = [], [], []
        for line in fh:
            if not line.strip():
                continue
            i, j, w = line.split()
            rows.append(int(i))
            cols.append(int(j))
            weights.append(float(w))
    return SimilarityGraph(
        ids,
        np.array(rows, dtype=np.int64),
        np.array(cols, dtype=np.int64),
        np.array(weights),
    )
