import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenenav.graph import ObjectFeatures
from scenenav.oracle.rules import RuleOracle
from scenenav.oracle.tables import OracleTables, SynonymTable, default_tables
from scenenav.schema import builtin_schema


@pytest.fixture
def oracle():
    return RuleOracle()


@pytest.fixture
def home():
    return builtin_schema("home")


def feats(*labels):
    return ObjectFeatures(items=tuple((l, "") for l in labels))


def test_synonym_groups_must_be_disjoint():
    with pytest.raises(ValueError):
        SynonymTable(groups=[frozenset({"a", "b"}), frozenset({"b", "c"})])


def test_similar_labels_place_names(oracle):
    got = oracle.similar_labels(
        "livingroom",
        ["kitchen_1", "livingroom_1", "livingroom_2", "bedroom_1", "familyroom_2"],
    )
    assert got == ["livingroom_1", "livingroom_2", "familyroom_2"]


def test_similar_labels_empty(oracle):
    assert oracle.similar_labels("livingroom", []) == []


def test_similar_labels_without_group_falls_back_to_exact(oracle):
    got = oracle.similar_labels("gym", ["gym_1", "kitchen_1", "gym_2"])
    assert got == ["gym_1", "gym_2"]


def test_match_place_reflexive(oracle):
    a = feats("bed", "lamp", "dresser")
    decision = oracle.match_place(a, a)
    assert decision.matched
    assert 0.0 < decision.confidence < 1.0


def test_match_place_disjoint(oracle):
    decision = oracle.match_place(feats("bed", "lamp"), feats("sink", "oven"))
    assert not decision.matched
    assert 0.0 < decision.confidence < 0.5


def test_match_place_frozen_overlap_point_six(oracle):
    # unweighted labels chosen so weighted Jaccard = 3/5 = 0.6
    a = feats("vase", "plant", "mirror", "window")
    b = feats("vase", "plant", "mirror", "curtain")
    decision = oracle.match_place(a, b)
    assert decision.matched
    expected = 1.0 / (1.0 + math.exp(-4.0 * (0.6 - 0.5)))
    assert decision.confidence == pytest.approx(expected, abs=1e-12)
    assert decision.confidence == pytest.approx(0.598687660112452, abs=1e-12)


def test_match_place_symmetry_fuzz(oracle):
    labels = ["bed", "sofa", "lamp", "sink", "mirror", "vase"]
    for k in range(len(labels)):
        a = feats(*labels[: k + 1])
        b = feats(*labels[k:])
        assert oracle.match_place(a, b).matched == oracle.match_place(b, a).matched
        assert oracle.match_place(a, b).confidence == oracle.match_place(b, a).confidence


def test_match_place_both_empty_matches(oracle):
    assert oracle.match_place(feats(), feats()).matched


def test_classify_elements_paper_frame(oracle, home):
    labels = [
        "livingroom_0", "window_13", "door_2", "doorway_3",
        "table_4", "stairs_10", "wall_8",
    ]
    got = oracle.classify_elements(labels, home)
    assert got.place_label == "livingroom_0"
    assert got.connectors == ("door_2", "doorway_3", "stairs_10")
    assert got.objects == ("window_13", "table_4")


def test_classify_elements_empty(oracle, home):
    got = oracle.classify_elements([], home)
    assert got.place_label is None
    assert got.connectors == () and got.objects == ()


def test_classify_elements_lexicon(oracle, home):
    got = oracle.classify_elements(["fridge", "doorway"], home)
    assert got.connectors == ("doorway",)
    assert got.objects == ("fridge",)


def test_classify_without_connector_concepts(oracle):
    market = builtin_schema("supermarket")
    got = oracle.classify_elements(["milk", "gate"], market)
    assert got.connectors == ()
    assert got.objects == ("milk", "gate")


def test_classify_strips_place_prefix(oracle, home):
    got = oracle.classify_elements(["livingroom sofa_6", "bathroom mirror_1"], home)
    assert got.objects == ("sofa_6", "mirror_1")


def test_match_object_paper_example(oracle):
    probe = ("doorframe", "", feats("tv", "chair", "stool"))
    candidates = [
        ("doorframe_2", "doorframe", "", feats("chair", "sofa")),
        ("doorframe_3", "doorframe", "", feats("tv", "chair")),
        ("door_2", "door", "", feats("table", "sink", "lamp")),
    ]
    assert oracle.match_object(probe, candidates) == "doorframe_3"


def test_match_object_empty_and_exact(oracle):
    assert oracle.match_object(("bed", "", feats()), []) is None
    probe = ("bed", "white", feats("lamp", "dresser"))
    candidates = [("bed_1", "bed", "white", feats("lamp", "dresser"))]
    assert oracle.match_object(probe, candidates) == "bed_1"


def test_match_object_label_mismatch_gives_none(oracle):
    probe = ("plant", "", feats("sofa"))
    candidates = [("bed_1", "bed", "", feats("sofa"))]
    assert oracle.match_object(probe, candidates) is None


def test_infer_region_empty_existing_is_new(oracle, home):
    choice = oracle.infer_region(
        home, "Floor", [], ("bedroom_1", "bedroom"), None
    )
    assert choice.is_new
    assert choice.value == "floor"


def test_infer_region_same_without_crossing(oracle, home):
    choice = oracle.infer_region(
        home,
        "Floor",
        [("floor_1", "floor")],
        ("kitchen_1", "kitchen"),
        ("bedroom_1", "bedroom"),
        previous_region="floor_1",
        via_label="door_2",
    )
    assert not choice.is_new
    assert choice.value == "floor_1"


def test_infer_region_new_after_region_connector(oracle, home):
    choice = oracle.infer_region(
        home,
        "Floor",
        [("floor_1", "floor")],
        ("bedroom_2", "bedroom"),
        ("kitchen_1", "kitchen"),
        previous_region="floor_1",
        via_label="stairs_1",
    )
    assert choice.is_new


def test_select_region_cooccurrence(oracle):
    got = oracle.select_region(
        [("kitchen_1", "kitchen", "fridge, oven"), ("livingroom_1", "livingroom", "sofa")],
        "sink",
    )
    assert got.chosen == "kitchen_1"


def test_select_region_single_candidate(oracle):
    got = oracle.select_region([("pantry_1", "pantry", "")], "sink")
    assert got.chosen == "pantry_1"


def test_select_region_rule_table(oracle):
    got = oracle.select_region(
        [("bedroom_1", "bedroom", "bed"), ("bathroom_2", "bathroom", "mirror")], "sink"
    )
    assert got.chosen == "bathroom_2"


def test_select_region_direct_evidence_wins(oracle):
    got = oracle.select_region(
        [("bedroom_1", "bedroom", "bed, sink"), ("bathroom_2", "bathroom", "mirror")],
        "sink",
    )
    assert got.chosen == "bedroom_1"


def test_select_object_nearness(oracle):
    objects = [
        ("mirror_2", "mirror", ""),
        ("lamp_1", "lamp", ""),
        ("picture_7", "picture", ""),
        ("toilet_8", "toilet", ""),
        ("sofa_11", "sofa", ""),
    ]
    assert oracle.select_object(objects, "sink").chosen == "mirror_2"


def test_select_object_single_and_table(oracle):
    assert oracle.select_object([("lamp_1", "lamp", "")], "sink").chosen == "lamp_1"
    got = oracle.select_object([("chair_4", "chair", ""), ("bed_9", "bed", "")], "table")
    assert got.chosen == "chair_4"


def test_select_object_goal_itself_preferred(oracle):
    objects = [("mirror_2", "mirror", ""), ("sink_3", "sink", "")]
    assert oracle.select_object(objects, "sink").chosen == "sink_3"


def test_goal_match_substring(oracle):
    assert oracle.goal_match([("bed", "red cotton floral")], "bed") == (
        "bed",
        "red cotton floral",
    )


def test_goal_match_descriptor_conjunction(oracle):
    assert oracle.goal_match([("bed", "blue plain")], "red floral bed") is None
    assert oracle.goal_match([("bed", "red cotton floral")], "red floral bed") == (
        "bed",
        "red cotton floral",
    )


def test_goal_match_synonyms(oracle):
    assert oracle.goal_match([("couch", "gray fabric")], "settee") == ("couch", "gray fabric")


def test_goal_match_no_detections(oracle):
    assert oracle.goal_match([], "bed") is None


_label = st.sampled_from(
    ["bed", "sofa", "lamp", "mirror", "door", "sink", "chair", "table", "vase", "plant"]
)


@settings(max_examples=80, deadline=None)
@given(
    goal=_label,
    candidates=st.lists(st.tuples(_label, _label), min_size=1, max_size=6),
)
def test_select_closure_fuzz(goal, candidates):
    oracle = RuleOracle()
    cands = [(f"{label}_{i}", label, desc) for i, (label, desc) in enumerate(candidates)]
    ids = {c[0] for c in cands}
    assert oracle.select_region([(i, l, d) for i, l, d in cands], goal).chosen in ids
    assert oracle.select_object(cands, goal).chosen in ids
    probe = (goal, "", feats(*[l for _, l in candidates]))
    match_candidates = [(cid, label, desc, feats(desc)) for cid, label, desc in cands]
    got = oracle.match_object(probe, match_candidates)
    assert got is None or got in ids


@settings(max_examples=60, deadline=None)
@given(
    a=st.lists(_label, max_size=6),
    b=st.lists(_label, max_size=6),
)
def test_confidence_always_in_open_interval(a, b):
    oracle = RuleOracle()
    decision = oracle.match_place(feats(*a), feats(*b))
    assert 0.0 < decision.confidence < 1.0


def test_rule_backend_is_deterministic():
    a, b = RuleOracle(seed=1), RuleOracle(seed=2)
    fa = feats("bed", "lamp")
    fb = feats("bed", "mirror")
    assert a.match_place(fa, fb) == b.match_place(fa, fb)
    assert a.similar_labels("livingroom", ["lounge_1"]) == b.similar_labels(
        "livingroom", ["lounge_1"]
    )


def test_tables_from_dict_roundtrip():
    tables = OracleTables.from_dict(
        {"synonyms": [["couch", "sofa"]], "cooccurrence": {"sink": ["kitchen"]}}
    )
    assert tables.canonical("sofa") == "couch"
    assert tables.cooccurs("sink") == frozenset({"kitchen"})
    assert default_tables().is_large("sofa")
