import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from milprop.data import (
    CoverageWarning,
    DataError,
    Dataset,
    DimensionMismatch,
    DuplicateId,
    EmptyMembers,
    EmptySelection,
    Group,
    Instance,
    MalformedRecord,
    NonFiniteFeature,
    ScoreOutOfRange,
    UnresolvedMember,
    ValidationError,
    build_dataset,
    eval_true_labels,
    filter_groups,
    load_dataset,
    load_groups,
    load_instances,
    stats,
    validate,
    write_groups,
    write_instances,
)


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def two_instance_dataset(cover_both=True):
    instances = (
        Instance("s1", np.array([0.0, 0.0])),
        Instance("s2", np.array([1.0, 0.0])),
    )
    members = ("s1", "s2") if cover_both else ("s1",)
    return build_dataset(instances, (Group("r1", members, 1.0),))


class TestLoadInstances:
    def test_identity_parse(self, tmp_path):
        path = tmp_path / "inst.jsonl"
        write_lines(path, ['{"id":"s1","features":[0.0,0.0]}'])
        (inst,) = load_instances(str(path))
        assert inst.id == "s1"
        np.testing.assert_array_equal(inst.features, [0.0, 0.0])
        assert inst.true_label is None

    def test_default_width_vector_accepted(self, tmp_path):
        path = tmp_path / "inst.jsonl"
        feats = list(np.linspace(-1, 1, 24))
        write_lines(path, [json.dumps({"id": "s1", "features": feats})])
        (inst,) = load_instances(str(path), dim=24)
        assert inst.dim == 24

    def test_nan_component_rejected(self, tmp_path):
        path = tmp_path / "inst.jsonl"
        write_lines(path, ['{"id":"s1","features":[0.0,NaN]}'])
        with pytest.raises(NonFiniteFeature):
            load_instances(str(path))

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "inst.jsonl"
        write_lines(path, ['{"id":"s1","features":[0.0]}', "{not json"])
        with pytest.raises(MalformedRecord, match=":2"):
            load_instances(str(path))

    def test_dimension_mismatch(self, tmp_path):
        path = tmp_path / "inst.jsonl"
        write_lines(path, ['{"id":"s1","features":[0.0,1.0,2.0]}'])
        with pytest.raises(DimensionMismatch, match="s1"):
            load_instances(str(path), dim=2)

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "inst.jsonl"
        write_lines(path, [
            '{"id":"s1","features":[0.0]}',
            '{"id":"s1","features":[1.0]}',
        ])
        with pytest.raises(DuplicateId):
            load_instances(str(path))

    def test_bad_label_rejected(self, tmp_path):
        path = tmp_path / "inst.jsonl"
        write_lines(path, ['{"id":"s1","features":[0.0],"label":2}'])
        with pytest.raises(MalformedRecord, match="label"):
            load_instances(str(path))

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "inst.jsonl"
        write_lines(path, ['{"id":"s1","features":[0.0]}', "", '{"id":"s2","features":[1.0]}'])
        assert [i.id for i in load_instances(str(path))] == ["s1", "s2"]


class TestLoadGroups:
    def setup_method(self):
        self.instances = [
            Instance("s1", np.array([0.0])),
            Instance("s2", np.array([1.0])),
        ]

    def test_identity_parse(self, tmp_path):
        path = tmp_path / "grp.jsonl"
        write_lines(path, ['{"id":"r1","score":1.0,"members":["s1","s2"]}'])
        (grp,) = load_groups(str(path), self.instances)
        assert grp.id == "r1"
        assert grp.members == ("s1", "s2")
        assert grp.score == 1.0

    def test_score_out_of_range(self, tmp_path):
        path = tmp_path / "grp.jsonl"
        write_lines(path, ['{"id":"r1","score":1.5,"members":["s1"]}'])
        with pytest.raises(ScoreOutOfRange):
            load_groups(str(path), self.instances)

    def test_unresolved_member(self, tmp_path):
        path = tmp_path / "grp.jsonl"
        write_lines(path, ['{"id":"r1","score":0.5,"members":["zz"]}'])
        with pytest.raises(UnresolvedMember, match="zz"):
            load_groups(str(path), self.instances)

    def test_empty_member_list(self, tmp_path):
        path = tmp_path / "grp.jsonl"
        write_lines(path, ['{"id":"r1","score":0.5,"members":[]}'])
        with pytest.raises(EmptyMembers):
            load_groups(str(path), self.instances)

    def test_tags_parsed(self, tmp_path):
        path = tmp_path / "grp.jsonl"
        write_lines(path, ['{"id":"r1","score":0.0,"members":["s1"],"tags":["ctx"]}'])
        (grp,) = load_groups(str(path), self.instances)
        assert grp.tags == ("ctx",)


class TestValidate:
    def test_full_coverage_strict_ok(self):
        ds = two_instance_dataset(cover_both=True)
        assert validate(ds, strict_coverage=True) is ds

    def test_uncovered_instance_strict_names_id(self):
        ds = two_instance_dataset(cover_both=False)
        with pytest.raises(ValidationError, match="UncoveredInstance: s2"):
            validate(ds, strict_coverage=True)

    def test_uncovered_instance_nonstrict_warns_once(self):
        ds = two_instance_dataset(cover_both=False)
        with pytest.warns(CoverageWarning) as record:
            assert validate(ds, strict_coverage=False) is ds
        assert len(record) == 1

    def test_aggregates_all_violations(self):
        ds = Dataset(
            (Instance("s1", np.array([0.0])), Instance("s2", np.array([0.0, 1.0]))),
            (Group("r1", ("s1", "zz"), 0.5),),
            dim=1,
        )
        with pytest.raises(ValidationError) as err:
            validate(ds, strict_coverage=True)
        text = str(err.value)
        assert "DimensionMismatch" in text and "s2" in text
        assert "UnresolvedMember" in text and "zz" in text
        assert "UncoveredInstance" in text

    def test_build_dataset_rejects_empty(self):
        with pytest.raises(DataError):
            build_dataset([], [Group("r1", ("s1",), 0.5)])
        with pytest.raises(DataError):
            build_dataset([Instance("s1", np.array([0.0]))], [])


class TestFilterGroups:
    def make(self):
        instances = [Instance(f"s{i}", np.array([float(i)])) for i in range(4)]
        groups = [
            Group("r1", ("s0", "s1"), 1.0, tags=("a",)),
            Group("r2", ("s2", "s3"), 0.0, tags=("b",)),
        ]
        return build_dataset(instances, groups)

    def test_subset_keeps_only_referenced_instances(self):
        ds = filter_groups(self.make(), group_ids={"r1"})
        assert [g.id for g in ds.groups] == ["r1"]
        assert [i.id for i in ds.instances] == ["s0", "s1"]
        assert ds.dim == 1

    def test_select_all_is_identity(self):
        ds = self.make()
        assert filter_groups(ds, group_ids={"r1", "r2"}) == ds

    def test_empty_selection(self):
        with pytest.raises(EmptySelection):
            filter_groups(self.make(), group_ids=set())

    def test_tag_filter(self):
        ds = filter_groups(self.make(), tag="b")
        assert [g.id for g in ds.groups] == ["r2"]

    def test_idempotent(self):
        ds = self.make()
        once = filter_groups(ds, tag="a")
        assert filter_groups(once, tag="a") == once

    def test_exactly_one_predicate(self):
        with pytest.raises(ValueError):
            filter_groups(self.make())
        with pytest.raises(ValueError):
            filter_groups(self.make(), group_ids={"r1"}, tag="a")


def test_stats_counts():
    instances = [Instance(f"s{i}", np.array([0.0])) for i in range(3)]
    ds = build_dataset(instances, [Group("r1", ("s0", "s1", "s2"), 1.0)])
    summary = stats(ds)
    assert summary.n_instances == 3
    assert summary.n_groups == 1
    assert summary.mean_group_size == 3.0
    assert sum(summary.score_histogram) == 1
    assert summary.score_histogram[-1] == 1  # score 1.0 lands in the top bin


def test_eval_true_labels_requires_labels():
    labelled = [Instance("a", np.array([0.0]), 1), Instance("b", np.array([1.0]), 0)]
    np.testing.assert_array_equal(eval_true_labels(labelled), [1, 0])
    with pytest.raises(DataError, match="no ground-truth label"):
        eval_true_labels([Instance("c", np.array([0.0]))])


def test_instance_features_are_immutable():
    inst = Instance("a", np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        inst.features[0] = 5.0


ids = st.text(alphabet="abcdefgh", min_size=1, max_size=6)
floats = st.floats(min_value=-100, max_value=100, allow_nan=False, width=32)


@st.composite
def datasets(draw):
    dim = draw(st.integers(1, 4))
    inst_ids = draw(st.lists(ids, min_size=1, max_size=8, unique=True))
    instances = []
    for inst_id in inst_ids:
        feats = draw(st.lists(floats, min_size=dim, max_size=dim))
        label = draw(st.sampled_from([None, 0, 1]))
        instances.append(Instance(inst_id, np.array(feats, dtype=np.float64), label))
    n_groups = draw(st.integers(1, 4))
    groups = []
    for k in range(n_groups):
        members = draw(
            st.lists(st.sampled_from(inst_ids), min_size=1, max_size=6)
        )
        score = draw(st.floats(min_value=0, max_value=1, allow_nan=False))
        tags = draw(st.lists(st.sampled_from(["x", "y"]), max_size=2, unique=True))
        groups.append(Group(f"g{k}", tuple(members), score, tuple(tags)))
    return build_dataset(instances, groups)


@settings(max_examples=50, deadline=None)
@given(datasets())
def test_write_load_round_trip(tmp_path_factory, ds):
    tmp = tmp_path_factory.mktemp("roundtrip")
    write_instances(ds.instances, str(tmp / "inst.jsonl"))
    write_groups(ds.groups, str(tmp / "grp.jsonl"))
    instances = load_instances(str(tmp / "inst.jsonl"))
    groups = load_groups(str(tmp / "grp.jsonl"), instances)
    reloaded = build_dataset(instances, groups)
    assert reloaded == ds


def test_load_dataset_end_to_end(tmp_path):
    write_lines(tmp_path / "inst.jsonl", [
        '{"id":"s1","features":[0.0,0.0],"label":0}',
        '{"id":"s2","features":[1.0,0.0],"label":1}',
    ])
    write_lines(tmp_path / "grp.jsonl", [
        '{"id":"r1","score":0.5,"members":["s1","s2","s2"]}',
    ])
    ds = load_dataset(str(tmp_path / "inst.jsonl"), str(tmp_path / "grp.jsonl"))
    assert ds.n_instances == 2
    assert ds.group("r1").members == ("s1", "s2", "s2")
    with pytest.raises(UnresolvedMember):
        ds.instance("nope")
