"""Data model and JSONL ingestion for group-labelled instance data.

An :class:`Instance` is an identified feature vector; a :class:`Group` is an
identified multiset of instance ids carrying an observed score in [0, 1].
A member id may repeat inside a group (it then counts multiply in the group
mean) and an instance may belong to several groups.

Instances optionally carry a hidden ground-truth label. That label exists for
evaluation only: nothing in the training path reads it, and the sanctioned way
to access it is :func:`eval_true_labels`.

All containers are immutable after construction, so a validated
:class:`Dataset` can be shared across any number of readers. Loading is
single-threaded.

File formats (UTF-8, one JSON object per line):

* instances: ``{"id": str, "features": [number, ...], "label": 0|1}``
  with ``label`` optional;
* groups: ``{"id": str, "score": number, "members": [str, ...],
  "tags": [str, ...]}`` with ``tags`` optional.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class DataError(Exception):
    """Base class for dataset loading and validation failures."""


class MalformedRecord(DataError):
    """A line could not be parsed into the expected record shape."""


class DuplicateId(DataError):
    """Two records in the same file or dataset share an id."""


class DimensionMismatch(DataError):
    """A feature vector has the wrong number of components."""


class NonFiniteFeature(DataError):
    """A feature vector contains NaN or infinity."""


class ScoreOutOfRange(DataError):
    """A group score falls outside [0, 1]."""


class UnresolvedMember(DataError):
    """A group references an instance id that does not exist."""


class EmptyMembers(DataError):
    """A group has no members."""


class EmptySelection(DataError):
    """A group filter selected nothing."""


class ValidationError(DataError):
    """Aggregated report of every violated dataset invariant."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class CoverageWarning(UserWarning):
    """An instance is not referenced by any group."""


@dataclass(frozen=True, eq=False)
class Instance:
    """An identified feature vector.

    ``true_label`` is hidden ground truth (0/1) used only when scoring the
    quality of inferred labels; read it through :func:`eval_true_labels`.
    """

    id: str
    features: np.ndarray
    true_label: int | None = None

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 1:
            raise DimensionMismatch(
                f"instance {self.id!r}: features must be a flat vector"
            )
        if feats.size == 0:
            raise DimensionMismatch(f"instance {self.id!r}: empty feature vector")
        if not np.all(np.isfinite(feats)):
            raise NonFiniteFeature(
                f"instance {self.id!r}: non-finite feature component"
            )
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)

    @property
    def dim(self) -> int:
        return self.features.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.id == other.id
            and np.array_equal(self.features, other.features)
            and self.true_label == other.true_label
        )

    def __hash__(self) -> int:
        return hash(self.id)


@dataclass(frozen=True)
class Group:
    """An identified multiset of instance ids with an observed score.

    Scores are any real in [0, 1]; binary 0/1 labels are the common special
    case and proportions are accepted. Duplicate member ids are legal and
    count multiply in the group mean.
    """

    id: str
    members: tuple[str, ...]
    score: float
    tags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "tags", tuple(self.tags))
        object.__setattr__(self, "score", float(self.score))
        if len(self.members) == 0:
            raise EmptyMembers(f"group {self.id!r}: empty member list")
        if not np.isfinite(self.score) or not 0.0 <= self.score <= 1.0:
            raise ScoreOutOfRange(
                f"group {self.id!r}: score {self.score} outside [0, 1]"
            )

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Validated instances plus groups sharing one feature dimension."""

    instances: tuple[Instance, ...]
    groups: tuple[Group, ...]
    dim: int
    _instance_index: dict = field(init=False, repr=False, compare=False)
    _group_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "instances", tuple(self.instances))
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(
            self, "_instance_index", {inst.id: inst for inst in self.instances}
        )
        object.__setattr__(self, "_group_index", {g.id: g for g in self.groups})

    @property
    def n_instances(self) -> int:
        return len(self.instances)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def instance(self, instance_id: str) -> Instance:
        try:
            return self._instance_index[instance_id]
        except KeyError:
            raise UnresolvedMember(f"unknown instance id {instance_id!r}") from None

    def group(self, group_id: str) -> Group:
        try:
            return self._group_index[group_id]
        except KeyError:
            raise DataError(f"unknown group id {group_id!r}") from None

    def has_instance(self, instance_id: str) -> bool:
        return instance_id in self._instance_index

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.instances == other.instances
            and self.groups == other.groups
        )


@dataclass(frozen=True)
class DatasetStats:
    n_instances: int
    n_groups: int
    dim: int
    mean_group_size: float
    score_histogram: tuple[int, ...]  # 10 equal bins over [0, 1]


def build_dataset(
    instances: Iterable[Instance], groups: Iterable[Group]
) -> Dataset:
    """Wire instances and groups into a Dataset (no invariant aggregation).

    Rejects immediately anything that would corrupt indexing: empty
    collections, duplicate ids, inconsistent feature dimensions. Run
    :func:`validate` afterwards for the full invariant sweep.
    """
    instances = tuple(instances)
    groups = tuple(groups)
    if not instances:
        raise DataError("dataset has no instances")
    if not groups:
        raise DataError("dataset has no groups")
    dim = instances[0].dim
    seen: set[str] = set()
    for inst in instances:
        if inst.id in seen:
            raise DuplicateId(f"duplicate instance id {inst.id!r}")
        seen.add(inst.id)
        if inst.dim != dim:
            raise DimensionMismatch(
                f"instance {inst.id!r} has {inst.dim} components, expected {dim}"
            )
    seen_groups: set[str] = set()
    for g in groups:
        if g.id in seen_groups:
            raise DuplicateId(f"duplicate group id {g.id!r}")
        seen_groups.add(g.id)
    return Dataset(instances, groups, dim)


def covered_instance_ids(dataset: Dataset) -> set[str]:
    """Ids of instances referenced by at least one group."""
    return {m for g in dataset.groups for m in g.members}


def validate(dataset: Dataset, strict_coverage: bool = False) -> Dataset:
    """Check every dataset invariant; return the dataset iff all hold.

    Violations are aggregated into one :class:`ValidationError` naming each
    offending record. With ``strict_coverage`` an instance outside every
    group is a violation; without it, each such instance raises a
    :class:`CoverageWarning` instead.
    """
    violations: list[str] = []
    if dataset.n_instances < 1:
        violations.append("EmptyDataset: no instances")
    if dataset.n_groups < 1:
        violations.append("EmptyDataset: no groups")

    seen: set[str] = set()
    for inst in dataset.instances:
        if inst.id in seen:
            violations.append(f"DuplicateId: {inst.id}")
        seen.add(inst.id)
        if inst.dim != dataset.dim:
            violations.append(
                f"DimensionMismatch: instance {inst.id} has {inst.dim} "
                f"components, expected {dataset.dim}"
            )

    seen_groups: set[str] = set()
    for g in dataset.groups:
        if g.id in seen_groups:
            violations.append(f"DuplicateId: {g.id}")
        seen_groups.add(g.id)
        for m in g.members:
            if not dataset.has_instance(m):
                violations.append(
                    f"UnresolvedMember: group {g.id} references {m}"
                )

    covered = covered_instance_ids(dataset)
    uncovered = [inst.id for inst in dataset.instances if inst.id not in covered]
    if strict_coverage:
        violations.extend(f"UncoveredInstance: {i}" for i in uncovered)
    else:
        for i in uncovered:
            warnings.warn(
                f"instance {i} is not referenced by any group", CoverageWarning,
                stacklevel=2,
            )

    if violations:
        raise ValidationError(violations)
    return dataset


def filter_groups(
    dataset: Dataset,
    group_ids: Iterable[str] | None = None,
    tag: str | None = None,
) -> Dataset:
    """Restrict a dataset to selected groups and the instances they reference.

    Exactly one predicate is given: an explicit group-id set, or a tag that
    selected groups must carry. The feature dimension is unchanged. Raises
    :class:`EmptySelection` when nothing matches.
    """
    if (group_ids is None) == (tag is None):
        raise ValueError("provide exactly one of group_ids or tag")
    if group_ids is not None:
        wanted = set(group_ids)
        selected = tuple(g for g in dataset.groups if g.id in wanted)
    else:
        selected = tuple(g for g in dataset.groups if tag in g.tags)
    if not selected:
        raise EmptySelection("group filter selected no groups")
    member_union = {m for g in selected for m in g.members}
    kept = tuple(i for i in dataset.instances if i.id in member_union)
    return Dataset(kept, selected, dataset.dim)


def stats(dataset: Dataset) -> DatasetStats:
    """Exact summary counts plus a 10-bin histogram of group scores."""
    sizes = [g.size for g in dataset.groups]
    scores = np.array([g.score for g in dataset.groups])
    hist, _ = np.histogram(scores, bins=10, range=(0.0, 1.0))
    return DatasetStats(
        n_instances=dataset.n_instances,
        n_groups=dataset.n_groups,
        dim=dataset.dim,
        mean_group_size=float(np.mean(sizes)),
        score_histogram=tuple(int(c) for c in hist),
    )


def eval_true_labels(instances: Sequence[Instance]) -> np.ndarray:
    """Hidden ground-truth labels, for evaluation code only.

    This is the single sanctioned access path to ``Instance.true_label``;
    training code never calls it. Raises if any instance has no label.
    """
    labels = []
    for inst in instances:
        if inst.true_label is None:
            raise DataError(f"instance {inst.id!r} carries no ground-truth label")
        labels.append(int(inst.true_label))
    return np.array(labels, dtype=np.int64)


def _parse_line(path: str, lineno: int, line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as err:
        raise MalformedRecord(f"{path}:{lineno}: invalid JSON ({err.msg})") from None
    if not isinstance(obj, dict):
        raise MalformedRecord(f"{path}:{lineno}: expected a JSON object")
    return obj


def load_instances(path: str, dim: int | None = None) -> list[Instance]:
    """Parse an instances JSONL file; every error names the offending line."""
    instances: list[Instance] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = _parse_line(path, lineno, line)
            inst_id = obj.get("id")
            feats = obj.get("features")
            if not isinstance(inst_id, str) or not inst_id:
                raise MalformedRecord(f"{path}:{lineno}: missing or bad 'id'")
            if not isinstance(feats, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool)
                for v in feats
            ):
                raise MalformedRecord(
                    f"{path}:{lineno}: 'features' must be a list of numbers"
                )
            label = obj.get("label")
            if label is not None and label not in (0, 1):
                raise MalformedRecord(
                    f"{path}:{lineno}: 'label' must be 0 or 1 when present"
                )
            try:
                inst = Instance(inst_id, np.array(feats, dtype=np.float64), label)
            except DataError as err:
                raise type(err)(f"{path}:{lineno}: {err}") from None
            if dim is not None and inst.dim != dim:
                raise DimensionMismatch(
                    f"{path}:{lineno}: instance {inst_id!r} has {inst.dim} "
                    f"components, expected {dim}"
                )
            if inst.id in seen:
                raise DuplicateId(
                    f"{path}:{lineno}: duplicate instance id {inst.id!r}"
                )
            seen.add(inst.id)
            instances.append(inst)
    return instances


def load_groups(path: str, instances: Sequence[Instance]) -> list[Group]:
    """Parse a groups JSONL file, resolving member ids against ``instances``."""
    known = {inst.id for inst in instances}
    groups: list[Group] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = _parse_line(path, lineno, line)
            group_id = obj.get("id")
            score = obj.get("score")
            members = obj.get("members")
            tags = obj.get("tags", [])
            if not isinstance(group_id, str) or not group_id:
                raise MalformedRecord(f"{path}:{lineno}: missing or bad 'id'")
            if not isinstance(score, (int, float)) or isinstance(score, bool):
                raise MalformedRecord(f"{path}:{lineno}: 'score' must be a number")
            if not isinstance(members, list) or not all(
                isinstance(m, str) for m in members
            ):
                raise MalformedRecord(
                    f"{path}:{lineno}: 'members' must be a list of instance ids"
                )
            if not isinstance(tags, list) or not all(
                isinstance(t, str) for t in tags
            ):
                raise MalformedRecord(f"{path}:{lineno}: 'tags' must be strings")
            for m in members:
                if m not in known:
                    raise UnresolvedMember(
                        f"{path}:{lineno}: group {group_id!r} references "
                        f"unknown instance {m!r}"
                    )
            try:
                group = Group(group_id, tuple(members), float(score), tuple(tags))
            except DataError as err:
                raise type(err)(f"{path}:{lineno}: {err}") from None
            if group.id in seen:
                raise DuplicateId(
                    f"{path}:{lineno}: duplicate group id {group.id!r}"
                )
            seen.add(group.id)
            groups.append(group)
    return groups


def load_dataset(
    instances_path: str,
    groups_path: str,
    dim: int | None = None,
    strict_coverage: bool = False,
) -> Dataset:
    """Load, wire and validate a dataset from the two JSONL files."""
    instances = load_instances(instances_path, dim=dim)
    groups = load_groups(groups_path, instances)
    return validate(build_dataset(instances, groups), strict_coverage=strict_coverage)


def write_instances(instances: Sequence[Instance], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            record: dict = {
                "id": inst.id,
                "features": [float(v) for v in inst.features],
            }
            if inst.true_label is not None:
                record["label"] = int(inst.true_label)
            fh.write(json.dumps(record) + "\n")


def write_groups(groups: Sequence[Group], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for g in groups:
            record: dict = {
                "id": g.id,
                "score": float(g.score),
                "members": list(g.members),
            }
            if g.tags:
                record["tags"] = list(g.tags)
            fh.write(json.dumps(record) + "\n")
