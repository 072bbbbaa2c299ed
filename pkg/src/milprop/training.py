"""Mini-batch SGD over the joint objective.

The schedule: groups are shuffled once per epoch with the seeded generator
and partitioned into consecutive chunks of ``batch_groups`` (the final short
chunk is processed, not dropped). Each chunk gets a dense batch-local
similarity graph, a lambda from the configured scope, and ``inner_iters``
plain gradient steps at a constant learning rate. A total-iteration cap can
stop training early; the cap and the epoch schedule are both exposed because
either may be the binding budget.

theta starts at zero, which scores everything 0.5: a neutral start at which
a dataset whose group scores are all 0.5 is exactly stationary.
"""
from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from .data import CoverageWarning, Dataset, Group, covered_instance_ids, validate
from .objective import (
    Batch,
    Theta,
    gradient,
    lambda_from_alpha,
    make_batch,
    objective,
)
from .rng import make_rng
from .similarity import SimilarityConfig, build_graph

MODEL_FORMAT_VERSION = 1


class TrainingError(Exception):
    """Training produced a non-finite objective or gradient."""


class ModelIOError(Exception):
    """A model file is unreadable or internally inconsistent."""


class UnsupportedVersion(ModelIOError):
    """A model file was written by a newer format version."""


@dataclass(frozen=True)
class Hyperparams:
    """Training configuration; defaults are the standard schedule."""

    alpha_tradeoff: float = 0.04
    learning_rate: float = 0.0001
    batch_groups: int = 50
    inner_iters: int = 7
    epochs: int = 3
    max_total_iters: int | None = 1050
    gamma: float = 1.0
    use_bias: bool = False
    lambda_scope: str = "batch"  # batch | global
    knn: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.alpha_tradeoff < 0:
            raise ValueError("alpha_tradeoff must be non-negative")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        for name in ("batch_groups", "inner_iters", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.max_total_iters is not None and self.max_total_iters < 1:
            raise ValueError("max_total_iters must be a positive integer")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.lambda_scope not in ("batch", "global"):
            raise ValueError("lambda_scope must be 'batch' or 'global'")
        if self.knn is not None and self.knn < 1:
            raise ValueError("knn must be >= 1")


@dataclass(frozen=True)
class TrainSummary:
    """Bookkeeping from a training run.

    ``final_objective`` is the objective of the last processed mini-batch
    after the final step. ``wall_time_s`` is measured, not persisted (model
    files stay byte-reproducible), so it is None on loaded models.
    """

    final_objective: float
    iterations: int
    wall_time_s: float | None = None


@dataclass(frozen=True, eq=False)
class Model:
    """Trained parameters plus the frozen hyperparameters that produced them."""

    theta: Theta
    dim: int
    hyperparams: Hyperparams
    summary: TrainSummary


@dataclass(frozen=True)
class BatchInfo:
    """Per-batch log record handed to the train() callback."""

    epoch: int
    index: int
    n_groups: int
    n_instances: int
    lam: float


def planned_iterations(n_groups: int, hp: Hyperparams) -> int:
    """min(cap, epochs * ceil(|G| / batch_groups) * inner_iters)."""
    per_epoch = math.ceil(n_groups / hp.batch_groups)
    total = hp.epochs * per_epoch * hp.inner_iters
    if hp.max_total_iters is not None:
        total = min(total, hp.max_total_iters)
    return total


def epoch_minibatches(
    groups: Sequence[Group], batch_groups: int, rng: np.random.Generator
) -> list[tuple[Group, ...]]:
    """One epoch's partition: shuffle once, then consecutive chunks.

    Sampling is without replacement; chunks are disjoint and their union is
    the full group list. A ``batch_groups`` larger than the list yields a
    single short batch.
    """
    order = rng.permutation(len(groups))
    shuffled = [groups[i] for i in order]
    return [
        tuple(shuffled[start : start + batch_groups])
        for start in range(0, len(shuffled), batch_groups)
    ]


def train(
    dataset: Dataset,
    hp: Hyperparams = Hyperparams(),
    on_batch: Callable[[BatchInfo], None] | None = None,
    workers: int = 1,
) -> Model:
    """Run the SGD schedule on a validated dataset and return the Model.

    ``on_batch`` (when given) receives one BatchInfo per mini-batch before
    its inner iterations, which is how tests audit the per-batch lambda.
    ``workers`` bounds graph-construction threads; it never changes results.
    """
    validate(dataset)
    uncovered = dataset.n_instances - len(covered_instance_ids(dataset))
    if uncovered:
        warnings.warn(
            f"{uncovered} instance(s) belong to no group; they receive no "
            "gradient and only matter at scoring time",
            CoverageWarning,
            stacklevel=2,
        )

    rng = make_rng(hp.seed)
    theta_vec = Theta.zeros(dataset.dim, hp.use_bias).to_array()

    global_graph = None
    if hp.knn is not None:
        global_graph = build_graph(
            dataset, SimilarityConfig(gamma=hp.gamma, knn=hp.knn), workers=workers
        )
    lam_global = lambda_from_alpha(
        hp.alpha_tradeoff, dataset.n_instances, dataset.n_groups
    )

    cap = planned_iterations(dataset.n_groups, hp)
    started = time.perf_counter()
    iterations = 0
    last_batch: Batch | None = None

    for epoch in range(hp.epochs):
        if iterations >= cap:
            break
        for b_index, chunk in enumerate(
            epoch_minibatches(dataset.groups, hp.batch_groups, rng)
        ):
            if iterations >= cap:
                break
            batch = make_batch(
                dataset, chunk, gamma=hp.gamma, lam=0.0, graph=global_graph
            )
            if hp.lambda_scope == "global":
                lam = lam_global
            else:
                lam = lambda_from_alpha(
                    hp.alpha_tradeoff, batch.n_instances, batch.n_groups
                )
            batch = Batch(
                batch.groups,
                batch.instance_ids,
                batch.X,
                batch.member_indices,
                batch.graph,
                lam,
            )
            if on_batch is not None:
                on_batch(
                    BatchInfo(epoch, b_index, batch.n_groups, batch.n_instances, lam)
                )
            theta = Theta.from_array(theta_vec, hp.use_bias)
            for _ in range(hp.inner_iters):
                if iterations >= cap:
                    break
                grad = gradient(theta, batch)
                if not np.all(np.isfinite(grad)):
                    raise TrainingError(
                        f"non-finite gradient at iteration {iterations} "
                        f"(epoch {epoch}, batch {b_index})"
                    )
                theta_vec = theta_vec - hp.learning_rate * grad
                theta = Theta.from_array(theta_vec, hp.use_bias)
                iterations += 1
            last_batch = batch

    theta = Theta.from_array(theta_vec, hp.use_bias)
    assert last_batch is not None  # dataset has >= 1 group post-validate
    final_objective = objective(theta, last_batch)
    if not np.isfinite(final_objective):
        raise TrainingError("non-finite objective after final iteration")
    summary = TrainSummary(
        final_objective=final_objective,
        iterations=iterations,
        wall_time_s=time.perf_counter() - started,
    )
    return Model(theta=theta, dim=dataset.dim, hyperparams=hp, summary=summary)


def save_model(model: Model, path: str) -> None:
    """Write the model JSON; floats use repr so theta round-trips bit-exactly."""
    record = {
        "version": MODEL_FORMAT_VERSION,
        "dim": model.dim,
        "bias": model.theta.bias is not None,
        "theta": [float(v) for v in model.theta.weights],
        "hyperparams": asdict(model.hyperparams),
        "summary": {
            "final_objective": model.summary.final_objective,
            "iterations": model.summary.iterations,
        },
    }
    if model.theta.bias is not None:
        record["bias_value"] = float(model.theta.bias)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(record) + "\n")


def load_model(path: str) -> Model:
    """Read a model JSON written by :func:`save_model`."""
    with open(path, encoding="utf-8") as fh:
        try:
            record = json.load(fh)
        except json.JSONDecodeError as err:
            raise ModelIOError(f"{path}: invalid JSON ({err.msg})") from None
    version = record.get("version")
    if version != MODEL_FORMAT_VERSION:
        raise UnsupportedVersion(
            f"{path}: format version {version!r}, supported {MODEL_FORMAT_VERSION}"
        )
    dim = record.get("dim")
    weights = record.get("theta")
    if not isinstance(dim, int) or not isinstance(weights, list):
        raise ModelIOError(f"{path}: missing dim or theta")
    if len(weights) != dim:
        raise ModelIOError(
            f"{path}: theta has {len(weights)} components but dim is {dim}"
        )
    use_bias = bool(record.get("bias"))
    bias_value = record.get("bias_value") if use_bias else None
    if use_bias and bias_value is None:
        raise ModelIOError(f"{path}: bias flag set but bias_value missing")
    try:
        theta = Theta(np.array(weights, dtype=np.float64), bias_value)
    except ValueError as err:
        raise ModelIOError(f"{path}: {err}") from None
    try:
        hp = Hyperparams(**record.get("hyperparams", {}))
    except (TypeError, ValueError) as err:
        raise ModelIOError(f"{path}: bad hyperparams ({err})") from None
    summary_rec = record.get("summary", {})
    summary = TrainSummary(
        final_objective=float(summary_rec.get("final_objective", math.nan)),
        iterations=int(summary_rec.get("iterations", 0)),
        wall_time_s=None,
    )
    return Model(theta=theta, dim=dim, hyperparams=hp, summary=summary)
