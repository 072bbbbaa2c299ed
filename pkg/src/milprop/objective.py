"""The joint training objective and its analytic gradient.

For a batch with instance scores y_i = sigma(theta . x_i) the objective is

    J(theta) = sum_{i != j} w(i, j) (y_i - y_j)^2
             + lambda * sum_g (mean_{i in g} y_i - s_g)^2

where the first sum runs over ordered pairs (so it equals twice the sum over
the stored unordered edges) and group means count duplicate members multiply.
lambda is set to alpha * |I|^2 / |G| so that both terms, whose raw maxima are
|I|^2 and |G|, contribute on the same scale; alpha keeps the trade-off
tunable.

Everything here is a pure function of (theta, batch): callers may evaluate
disjoint batches in parallel and own any accumulation into shared state.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit

from .data import Dataset, Group
from .similarity import SimilarityConfig, SimilarityGraph, build_graph, subgraph

_SCORE_FLOOR = np.nextafter(0.0, 1.0)
_SCORE_CEIL = np.nextafter(1.0, 0.0)


@dataclass(frozen=True, eq=False)
class Theta:
    """Logistic parameter vector, optionally with a bias term.

    The bias is off by default, matching the plain sigma(theta . x)
    classifier; when on, it acts as a constant-1 extra feature.
    """

    weights: np.ndarray
    bias: float | None = None

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1:
            raise ValueError("theta weights must be a flat vector")
        if not np.all(np.isfinite(w)):
            raise ValueError("theta weights must be finite")
        if self.bias is not None and not np.isfinite(self.bias):
            raise ValueError("theta bias must be finite")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.bias is not None:
            object.__setattr__(self, "bias", float(self.bias))

    @property
    def dim(self) -> int:
        return self.weights.size

    @classmethod
    def zeros(cls, dim: int, use_bias: bool = False) -> "Theta":
        return cls(np.zeros(dim), 0.0 if use_bias else None)

    def to_array(self) -> np.ndarray:
        """Flatten to the SGD parameter vector (bias last when present)."""
        if self.bias is None:
            return np.array(self.weights)
        return np.concatenate([self.weights, [self.bias]])

    @classmethod
    def from_array(cls, arr: np.ndarray, use_bias: bool) -> "Theta":
        arr = np.asarray(arr, dtype=np.float64)
        if use_bias:
            return cls(arr[:-1], float(arr[-1]))
        return cls(arr, None)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # expit is the sign-branched stable sigmoid; the clip only repairs
    # exact 0/1 produced by underflow so scores stay strictly inside (0, 1)
    return np.clip(expit(z), _SCORE_FLOOR, _SCORE_CEIL)


def predict_scores(theta: Theta, X: np.ndarray) -> np.ndarray:
    """Scores sigma(theta . x) for the rows of X, strictly inside (0, 1)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != theta.dim:
        raise ValueError(
            f"feature matrix of width {X.shape[-1] if X.ndim else '?'} does "
            f"not match theta dimension {theta.dim}"
        )
    # row-wise multiply-and-reduce instead of a BLAS matvec: the rounding of
    # each logit then depends only on its own row, so scoring an instance
    # alone or inside any batch gives bit-identical results
    z = (X * theta.weights).sum(axis=1)
    if theta.bias is not None:
        z = z + theta.bias
    return _sigmoid(z)


def predict_score(theta: Theta, x: np.ndarray) -> float:
    """Score for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (theta.dim,):
        raise ValueError(
            f"feature vector of shape {x.shape} does not match theta "
            f"dimension {theta.dim}"
        )
    return float(predict_scores(theta, x[None, :])[0])


def lambda_from_alpha(alpha: float, n_instances: int, n_groups: int) -> float:
    """Trade-off weight alpha * |I|^2 / |G| balancing the two raw term scales."""
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    if n_groups < 1:
        raise ValueError("n_groups must be >= 1")
    return alpha * float(n_instances) ** 2 / float(n_groups)


@dataclass(frozen=True, eq=False)
class Batch:
    """Groups plus the union of their member instances, ready to evaluate.

    ``X`` rows align with ``instance_ids``; ``member_indices[k]`` indexes the
    rows of group k's members (one entry per occurrence, so duplicates count
    multiply). The graph scope must equal ``instance_ids``.
    """

    groups: tuple[Group, ...]
    instance_ids: tuple[str, ...]
    X: np.ndarray
    member_indices: tuple[np.ndarray, ...]
    graph: SimilarityGraph
    lam: float

    def __post_init__(self) -> None:
        if not self.groups:
            raise ValueError("batch needs at least one group")
        if self.graph.ids != self.instance_ids:
            raise ValueError("graph scope must equal the batch instance set")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam}")

    @property
    def n_instances(self) -> int:
        return len(self.instance_ids)

    @property
    def n_groups(self) -> int:
        return len(self.groups)


def make_batch(
    dataset: Dataset,
    groups: Iterable[Group],
    gamma: float = 1.0,
    lam: float = 0.0,
    graph: SimilarityGraph | None = None,
) -> Batch:
    """Assemble a batch over the union of the groups' members.

    Instance order follows the dataset order. Without a precomputed graph,
    a dense batch-local graph is built with the given gamma; with one (for
    example a global kNN graph), its induced subgraph on the batch is used.
    """
    groups = tuple(groups)
    if not groups:
        raise ValueError("batch needs at least one group")
    member_union = {m for g in groups for m in g.members}
    ids = tuple(i.id for i in dataset.instances if i.id in member_union)
    if len(ids) != len(member_union):
        missing = sorted(member_union - set(ids))
        raise ValueError(f"groups reference unknown instances: {missing[:5]}")
    index = {id_: k for k, id_ in enumerate(ids)}
    X = np.stack([dataset.instance(i).features for i in ids])
    member_indices = tuple(
        np.array([index[m] for m in g.members], dtype=np.int64) for g in groups
    )
    if graph is None:
        graph = build_graph(dataset, SimilarityConfig(gamma=gamma), scope=ids)
    else:
        graph = subgraph(graph, ids)
    return Batch(groups, ids, X, member_indices, graph, float(lam))


def group_means(theta: Theta, batch: Batch) -> np.ndarray:
    """Per-group mean of member scores (duplicates counted multiply)."""
    s = predict_scores(theta, batch.X)
    return np.array([s[idx].mean() for idx in batch.member_indices])


def manifold_term(theta: Theta, batch: Batch) -> float:
    """Smoothness penalty over ordered pairs: sum w(i,j) (y_i - y_j)^2.

    Equal to twice the sum over the stored unordered edges.
    """
    g = batch.graph
    if g.n_edges == 0:
        return 0.0
    s = predict_scores(theta, batch.X)
    diffs = s[g.rows] - s[g.cols]
    return float(2.0 * np.sum(g.weights * diffs * diffs))


def group_term(theta: Theta, batch: Batch) -> float:
    """Fidelity penalty: sum over groups of (mean member score - s_g)^2."""
    means = group_means(theta, batch)
    scores = np.array([g.score for g in batch.groups])
    resid = means - scores
    return float(np.sum(resid * resid))


def objective(theta: Theta, batch: Batch) -> float:
    """manifold_term + lambda * group_term; non-negative."""
    return manifold_term(theta, batch) + batch.lam * group_term(theta, batch)


def gradient(theta: Theta, batch: Batch) -> np.ndarray:
    """Analytic gradient of the objective with respect to theta.

    Uses dy_i/dtheta = y_i (1 - y_i) x~_i with x~ the feature vector extended
    by 1 when a bias is present. Returned vector has length dim (dim + 1 with
    bias, bias component last), matching ``Theta.to_array``.
    """
    s = predict_scores(theta, batch.X)
    u = s * (1.0 - s)
    n = s.size
    coef = np.zeros(n)

    g = batch.graph
    if g.n_edges:
        # ordered-pair sum is twice the unordered one, and each squared
        # difference differentiates to 2 (y_i - y_j)(dy_i - dy_j)
        c = 4.0 * g.weights * (s[g.rows] - s[g.cols])
        coef += np.bincount(g.rows, weights=c, minlength=n)
        coef -= np.bincount(g.cols, weights=c, minlength=n)

    gcoef = np.zeros(n)
    for idx, grp in zip(batch.member_indices, batch.groups):
        r = 2.0 * (s[idx].mean() - grp.score) / idx.size
        np.add.at(gcoef, idx, r)

    per_instance = u * (coef + batch.lam * gcoef)
    grad_w = batch.X.T @ per_instance
    if theta.bias is None:
        return grad_w
    return np.concatenate([grad_w, [per_instance.sum()]])
