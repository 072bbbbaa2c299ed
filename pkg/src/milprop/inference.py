"""Scoring, neutral-band classification, attribution and metrics.

Label convention: a score in the open band (0.5 - b, 0.5 + b) is neutral;
scores exactly at the band edges take the non-neutral side, and with b = 0 a
score of exactly 0.5 classifies positive. This makes the rule total and
deterministic. Groups are classified by the plain mean of their member
scores with the same >= 0.5 tie-break and no neutral option.

All operations are pure given an immutable Model and safe to parallelize.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .data import Dataset, Group, Instance
from .objective import predict_scores
from .training import Model

POSITIVE = "positive"
NEGATIVE = "negative"
NEUTRAL = "neutral"


@dataclass(frozen=True)
class NeutralBand:
    """Half-width b of the abstention interval around 0.5."""

    b: float = 0.048

    def __post_init__(self) -> None:
        if not 0.0 <= self.b < 0.5:
            raise ValueError(f"band must satisfy 0 <= b < 0.5, got {self.b}")


@dataclass(frozen=True)
class InstancePrediction:
    id: str
    score: float
    label: str


@dataclass(frozen=True)
class ConfusionCounts:
    """Tallies over an evaluated prediction set (positive truth = 1)."""

    true_positive: int
    false_positive: int
    true_negative: int
    false_negative: int
    neutral: int

    @property
    def total(self) -> int:
        return (
            self.true_positive
            + self.false_positive
            + self.true_negative
            + self.false_negative
            + self.neutral
        )

    @property
    def decided(self) -> int:
        return self.total - self.neutral

    @property
    def correct(self) -> int:
        return self.true_positive + self.true_negative


@dataclass(frozen=True)
class MetricsReport:
    """Decided-set precision, coverage recall, and overall accuracy.

    precision = correct decided / decided (None when nothing was decided,
    rather than a masking 0.0); recall = decided / total; accuracy =
    correct decided / total, so abstentions count against accuracy.
    """

    precision: float | None
    recall: float
    accuracy: float
    counts: ConfusionCounts
    neutral_policy: str


@dataclass(frozen=True)
class AttributionReport:
    """Per-member scores for one group, sorted most positive first."""

    group_id: str
    group_score: float
    group_label: str
    members: tuple[InstancePrediction, ...]


def score_instances(model: Model, instances: Sequence[Instance]) -> np.ndarray:
    """Scores in (0, 1) for the given instances, order preserved."""
    if not instances:
        return np.empty(0)
    X = np.stack([inst.features for inst in instances])
    if X.shape[1] != model.dim:
        raise ValueError(
            f"instances have dimension {X.shape[1]}, model expects {model.dim}"
        )
    return predict_scores(model.theta, X)


def score_vector(model: Model, x: np.ndarray) -> float:
    """Score an arbitrary feature vector (for example a phrase embedding)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dim,):
        raise ValueError(f"vector of shape {x.shape}, model expects ({model.dim},)")
    return float(predict_scores(model.theta, x[None, :])[0])


def classify(score: float, band: NeutralBand) -> str:
    """Positive / negative / neutral for one score under the band."""
    if score >= 0.5 + band.b:
        return POSITIVE
    if score <= 0.5 - band.b:
        return NEGATIVE
    return NEUTRAL


def predict_instances(
    model: Model, instances: Sequence[Instance], band: NeutralBand = NeutralBand()
) -> list[InstancePrediction]:
    scores = score_instances(model, instances)
    return [
        InstancePrediction(inst.id, float(s), classify(float(s), band))
        for inst, s in zip(instances, scores)
    ]


def group_score(model: Model, group: Group, dataset: Dataset) -> float:
    """Arithmetic mean of member scores, duplicates counted multiply."""
    members = [dataset.instance(m) for m in group.members]
    return float(score_instances(model, members).mean())


def classify_group(model: Model, group: Group, dataset: Dataset) -> str:
    """Positive iff the group mean score is >= 0.5; never neutral."""
    return POSITIVE if group_score(model, group, dataset) >= 0.5 else NEGATIVE


def attribute(
    model: Model,
    group: Group,
    dataset: Dataset,
    band: NeutralBand = NeutralBand(),
) -> AttributionReport:
    """Per-member attribution for one group.

    Every member occurrence appears once (duplicates repeat), sorted by score
    descending with ties broken by id, so the most positive and most negative
    members are the first and last rows.
    """
    members = [dataset.instance(m) for m in group.members]
    scores = score_instances(model, members)
    rows = [
        InstancePrediction(inst.id, float(s), classify(float(s), band))
        for inst, s in zip(members, scores)
    ]
    rows.sort(key=lambda r: (-r.score, r.id))
    return AttributionReport(
        group_id=group.id,
        group_score=float(scores.mean()),
        group_label=POSITIVE if float(scores.mean()) >= 0.5 else NEGATIVE,
        members=tuple(rows),
    )


def evaluate_instances(
    predictions: Sequence[InstancePrediction],
    truths: Sequence[int],
    policy: str = "ignore_neutral",
) -> MetricsReport:
    """Score predictions against binary truths.

    ``ignore_neutral`` keeps the neutral labels as abstentions: they lower
    recall and are excluded from precision. ``no_neutral_band`` reclassifies
    every score with b = 0, so recall is 1 by construction.
    """
    if policy not in ("ignore_neutral", "no_neutral_band"):
        raise ValueError(f"unknown policy {policy!r}")
    if not predictions:
        raise ValueError("empty evaluation set")
    if len(predictions) != len(truths):
        raise ValueError(
            f"{len(predictions)} predictions but {len(truths)} truth labels"
        )
    if any(t not in (0, 1) for t in truths):
        raise ValueError("truth labels must be binary 0/1")

    if policy == "no_neutral_band":
        zero_band = NeutralBand(0.0)
        labels = [classify(p.score, zero_band) for p in predictions]
    else:
        labels = [p.label for p in predictions]

    tp = fp = tn = fn = neutral = 0
    for label, truth in zip(labels, truths):
        if label == NEUTRAL:
            neutral += 1
        elif label == POSITIVE:
            if truth == 1:
                tp += 1
            else:
                fp += 1
        else:
            if truth == 0:
                tn += 1
            else:
                fn += 1
    counts = ConfusionCounts(tp, fp, tn, fn, neutral)
    precision = counts.correct / counts.decided if counts.decided else None
    return MetricsReport(
        precision=precision,
        recall=counts.decided / counts.total,
        accuracy=counts.correct / counts.total,
        counts=counts,
        neutral_policy=policy,
    )


def evaluate_groups(model: Model, dataset: Dataset) -> float:
    """Fraction of groups whose mean-score classification matches their score.

    Requires binary group scores; the observed 1.0/0.0 is read as
    positive/negative truth.
    """
    if dataset.n_groups == 0:
        raise ValueError("dataset has no groups")
    correct = 0
    for g in dataset.groups:
        if g.score not in (0.0, 1.0):
            raise ValueError(
                f"group {g.id!r} has non-binary score {g.score}; "
                "group evaluation needs 0/1 scores"
            )
        truth = POSITIVE if g.score == 1.0 else NEGATIVE
        if classify_group(model, g, dataset) == truth:
            correct += 1
    return correct / dataset.n_groups


def calibrate_band(scores: Sequence[float], target_recall: float) -> NeutralBand:
    """Largest band whose non-neutral fraction still reaches target_recall.

    Recall as a function of b is a non-increasing step function; the largest
    admissible b is the k-th largest distance from 0.5 where k is the number
    of predictions that must stay decided. A target of 1 returns b = 0.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("empty score list")
    if not 0.0 < target_recall <= 1.0:
        raise ValueError(f"target_recall must be in (0, 1], got {target_recall}")
    if target_recall >= 1.0:
        return NeutralBand(0.0)
    k = math.ceil(target_recall * scores.size)
    distances = np.sort(np.abs(scores - 0.5))[::-1]
    b = float(distances[k - 1])
    # setting b to an item's own distance can still drop that item, because
    # classify compares against 0.5 +- b and the addition rounds; walk b down
    # by ulps until the realized (classify-measured) recall meets the target
    while b > 0.0 and realized_recall(scores, NeutralBand(b)) < target_recall:
        b = float(np.nextafter(b, 0.0))
    return NeutralBand(b)


def realized_recall(scores: Sequence[float], band: NeutralBand) -> float:
    """Fraction of scores the band leaves decided (same comparisons as classify)."""
    scores = np.asarray(scores, dtype=np.float64)
    decided = (scores >= 0.5 + band.b) | (scores <= 0.5 - band.b)
    return float(decided.sum() / scores.size)


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Area under the ROC curve via the rank statistic (ties averaged)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.size != labels.size or scores.size == 0:
        raise ValueError("scores and labels must be equal-length and non-empty")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = int(scores.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))
