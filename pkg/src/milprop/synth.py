"""Synthetic bag datasets with known instance labels, plus brute-force oracles.

The generator draws each instance from an isotropic Gaussian at its class
mean and builds group scores from the (hidden) instance labels, so trained
models can be judged against ground truth. The oracles re-evaluate the
training objective and its gradient by explicit loops and finite differences;
they deliberately share no arithmetic helpers with the optimized
implementation so that agreement between the two is evidence, not tautology.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, Group, Instance, build_dataset, validate
from .objective import Theta
from .rng import make_rng

_ORACLE_MAX_INSTANCES = 200  # the double loop is quadratic; keep it honest


@dataclass(frozen=True)
class SynthConfig:
    """Recipe for a synthetic bag dataset.

    composition picks how many positives land in each bag: ``fixed`` uses
    round(positive_fraction * size), ``uniform`` draws the count uniformly
    from 0..size, ``bernoulli`` flips each instance independently.
    score_mode ``proportion`` stores the exact positive fraction, while
    ``binary_majority`` stores 1.0 iff the fraction is >= 0.5.
    """

    dim: int = 2
    n_groups: int = 200
    group_size: int | tuple[int, int] = 10
    positive_mean: tuple[float, ...] = (2.0, 0.0)
    negative_mean: tuple[float, ...] = (-2.0, 0.0)
    noise_std: float = 0.5
    composition: str = "uniform"  # fixed | uniform | bernoulli
    positive_fraction: float = 0.5
    score_mode: str = "proportion"  # proportion | binary_majority
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1 or self.n_groups < 1:
            raise ValueError("dim and n_groups must be positive")
        if len(self.positive_mean) != self.dim or len(self.negative_mean) != self.dim:
            raise ValueError("class means must have length dim")
        if not self.noise_std > 0:
            raise ValueError("noise_std must be positive")
        if self.composition not in ("fixed", "uniform", "bernoulli"):
            raise ValueError(f"unknown composition {self.composition!r}")
        if self.score_mode not in ("proportion", "binary_majority"):
            raise ValueError(f"unknown score_mode {self.score_mode!r}")
        if not 0.0 <= self.positive_fraction <= 1.0:
            raise ValueError("positive_fraction must be in [0, 1]")
        if isinstance(self.group_size, tuple):
            lo, hi = self.group_size
            if lo < 1 or hi < lo:
                raise ValueError(f"bad group_size range {self.group_size}")
        elif self.group_size < 1:
            raise ValueError("group_size must be positive")


def default_benchmark(seed: int = 0) -> SynthConfig:
    """The standard well-separated benchmark used by the acceptance suite."""
    return SynthConfig(seed=seed)


def generate(config: SynthConfig) -> Dataset:
    """Draw a dataset; deterministic under the config seed.

    Every instance belongs to exactly one group, so the result passes strict
    coverage validation. Instances carry their true labels.
    """
    rng = make_rng(config.seed)
    pos_mean = np.array(config.positive_mean, dtype=np.float64)
    neg_mean = np.array(config.negative_mean, dtype=np.float64)

    instances: list[Instance] = []
    groups: list[Group] = []
    counter = 0
    for g_index in range(config.n_groups):
        if isinstance(config.group_size, tuple):
            lo, hi = config.group_size
            size = int(rng.integers(lo, hi + 1))
        else:
            size = config.group_size

        if config.composition == "fixed":
            n_pos = int(round(config.positive_fraction * size))
            labels = np.zeros(size, dtype=np.int64)
            labels[:n_pos] = 1
            rng.shuffle(labels)
        elif config.composition == "uniform":
            n_pos = int(rng.integers(0, size + 1))
            labels = np.zeros(size, dtype=np.int64)
            labels[:n_pos] = 1
            rng.shuffle(labels)
        else:  # bernoulli
            labels = (rng.random(size) < config.positive_fraction).astype(np.int64)

        member_ids = []
        for label in labels:
            mean = pos_mean if label == 1 else neg_mean
            feats = mean + config.noise_std * rng.standard_normal(config.dim)
            inst_id = f"i{counter:06d}"
            counter += 1
            instances.append(Instance(inst_id, feats, int(label)))
            member_ids.append(inst_id)

        fraction = int(labels.sum()) / size
        if config.score_mode == "proportion":
            score = fraction
        else:
            score = 1.0 if fraction >= 0.5 else 0.0
        groups.append(Group(f"g{g_index:04d}", tuple(member_ids), score))

    return validate(build_dataset(instances, groups), strict_coverage=True)


def with_seed(config: SynthConfig, seed: int) -> SynthConfig:
    return replace(config, seed=seed)


def _sigmoid_scalar(z: float) -> float:
    # independent re-implementation; do not replace with the package sigmoid
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def _score_all(theta: Theta, dataset: Dataset) -> dict[str, float]:
    scores: dict[str, float] = {}
    w = [float(v) for v in theta.weights]
    b = 0.0 if theta.bias is None else float(theta.bias)
    for inst in dataset.instances:
        z = b
        for wk, xk in zip(w, inst.features):
            z += wk * float(xk)
        scores[inst.id] = _sigmoid_scalar(z)
    return scores


def oracle_objective(
    theta: Theta, dataset: Dataset, gamma: float, lam: float
) -> float:
    """Direct evaluation of the objective by explicit loops.

    Sums the smoothness penalty over all ordered instance pairs and the
    fidelity penalty over all groups, nothing shared with the optimized path.
    Guarded to small datasets because the pair loop is quadratic.
    """
    if dataset.n_instances > _ORACLE_MAX_INSTANCES:
        raise ValueError(
            f"oracle limited to {_ORACLE_MAX_INSTANCES} instances, "
            f"got {dataset.n_instances}"
        )
    scores = _score_all(theta, dataset)
    insts = dataset.instances

    smooth = 0.0
    for i in range(len(insts)):
        for j in range(len(insts)):
            if i == j:
                continue
            d2 = 0.0
            for a, b in zip(insts[i].features, insts[j].features):
                d2 += (float(a) - float(b)) ** 2
            w = math.exp(-gamma * d2)
            diff = scores[insts[i].id] - scores[insts[j].id]
            smooth += w * diff * diff

    fidelity = 0.0
    for g in dataset.groups:
        total = 0.0
        for m in g.members:
            total += scores[m]
        resid = total / len(g.members) - g.score
        fidelity += resid * resid

    return smooth + lam * fidelity


def oracle_gradient(
    theta: Theta,
    dataset: Dataset,
    gamma: float,
    lam: float,
    step: float = 1e-6,
) -> np.ndarray:
    """Central finite differences of :func:`oracle_objective` per component.

    Component order matches ``Theta.to_array`` (bias last when present).
    """
    if not step > 0:
        raise ValueError("step must be positive")
    base = theta.to_array()
    use_bias = theta.bias is not None
    grad = np.zeros_like(base)
    for k in range(base.size):
        plus = base.copy()
        plus[k] += step
        minus = base.copy()
        minus[k] -= step
        j_plus = oracle_objective(Theta.from_array(plus, use_bias), dataset, gamma, lam)
        j_minus = oracle_objective(
            Theta.from_array(minus, use_bias), dataset, gamma, lam
        )
        grad[k] = (j_plus - j_minus) / (2.0 * step)
    return grad
