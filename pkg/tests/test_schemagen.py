import pytest

from scenenav.schema import ConceptKind, builtin_schema, verify_schema
from scenenav.schemagen import (
    AssemblyError,
    MockChatBackend,
    Triplet,
    assemble_schema,
    builtin_mock_backend,
    canonicalise,
    extract_triplets,
    generate_description,
    run_pipeline,
    trace_to_json,
)

HOUSEHOLD_TEXT = (
    "In the household environments, there are rooms, entrances and objects. "
    "Rooms hold objects and can be connected to other rooms or to entrances. "
    "Entrances sit near objects."
)

HOUSEHOLD_TRIPLET_REPLY = (
    "Triplets:\n[room, contains, object]\n[room, connects, entrance]\n"
    "[room, connects, room]\n[entrance, is near, object]"
)


def test_generate_description_uses_feedback_block():
    mock = MockChatBackend({"env_description": "Text: a home has rooms."})
    got = generate_description("household", None, mock)
    assert got == "a home has rooms."
    assert "structural errors" not in mock.transcript[0][1]
    mock = MockChatBackend({"env_description": "Text: fixed."})
    generate_description("household", "R9: a schema needs at least one place concept", mock)
    assert "R9" in mock.transcript[0][1]


def test_generate_description_rejects_empty_label():
    with pytest.raises(ValueError):
        generate_description("  ", None, MockChatBackend({}))


def test_extract_triplets_household_example():
    mock = MockChatBackend({"triplet_extraction": HOUSEHOLD_TRIPLET_REPLY})
    got = extract_triplets(HOUSEHOLD_TEXT, mock, "household")
    assert got == [
        Triplet("room", "contains", "object"),
        Triplet("room", "connects", "entrance"),
        Triplet("room", "connects", "room"),
        Triplet("entrance", "is near", "object"),
    ]


def test_extract_triplets_empty_description():
    assert extract_triplets("", MockChatBackend({}), "x") == []


def test_extract_triplets_survives_stray_prose():
    reply = (
        "Sure! Here is what I found.\nTriplets: first [room, contains, object]; "
        "also [room, connects, entrance] I think.\nHope that helps."
    )
    mock = MockChatBackend({"triplet_extraction": reply})
    got = extract_triplets("rooms hold objects", mock)
    assert len(got) == 2


def test_extract_triplets_retries_then_empty():
    mock = MockChatBackend({"triplet_extraction": ["no structure here", "still nothing"]})
    assert extract_triplets("text", mock) == []
    assert len(mock.transcript) == 2


def test_canonicalise_rewrites_and_drops():
    mock = MockChatBackend(
        {
            "triplet_canonicalisation": [
                "Answer: [room, contains, object]",
                "Answer: invalid",
                "Answer: [room, connects to, room]",
            ]
        }
    )
    triplets = [
        Triplet("place", "has", "desk"),
        Triplet("object", "is near", "room"),
        Triplet("room", "connects", "room"),
    ]
    canonical, kinds = canonicalise(triplets, mock, "household")
    assert canonical == [
        Triplet("room", "contains", "object"),
        Triplet("room", "connects to", "room"),
    ]
    assert kinds["object"] is ConceptKind.OBJECT_ROLE
    assert kinds["room"] is ConceptKind.PLACE


def test_canonicalise_identity_passthrough():
    mock = MockChatBackend({"triplet_canonicalisation": "Answer: [floor, contains, room]"})
    canonical, kinds = canonicalise([Triplet("floor", "contains", "room")], mock)
    assert canonical == [Triplet("floor", "contains", "room")]
    assert kinds["floor"] is ConceptKind.REGION


def test_assemble_home_matches_bundled_apartment_schema():
    triplets = [
        Triplet("home", "contains", "room"),
        Triplet("room", "contains", "object"),
        Triplet("room", "connects to", "entrance"),
        Triplet("entrance", "is near", "object"),
    ]
    schema = assemble_schema(triplets)
    assert schema.concepts == builtin_schema("apartment").concepts
    assert verify_schema(schema).valid


def test_assemble_hospital_matches_bundled_schema():
    triplets = [
        Triplet("hospital", "contains", "ward"),
        Triplet("ward", "contains", "object"),
        Triplet("ward", "connects to", "corridor"),
        Triplet("corridor", "is near", "object"),
    ]
    assert assemble_schema(triplets).concepts == builtin_schema("hospital").concepts


def test_assemble_airport_matches_bundled_schema():
    triplets = [
        Triplet("terminal", "contains", "gate"),
        Triplet("gate", "contains", "object"),
        Triplet("gate", "connects to", "gate"),
        Triplet("terminal", "connects to", "terminal"),
    ]
    assert assemble_schema(triplets).concepts == builtin_schema("airport").concepts


def test_assemble_empty_gives_object_only_schema():
    schema = assemble_schema([])
    assert list(schema.concepts) == ["Object"]
    assert not verify_schema(schema).valid


def test_assemble_containment_cycle_fails():
    triplets = [
        Triplet("a", "contains", "b"),
        Triplet("b", "contains", "a"),
        Triplet("a", "contains", "object"),
    ]
    with pytest.raises(AssemblyError, match="cycle"):
        assemble_schema(triplets)


def test_assemble_four_layer_hierarchy():
    triplets = [
        Triplet("campus", "contains", "building"),
        Triplet("building", "contains", "room"),
        Triplet("room", "contains", "object"),
        Triplet("room", "connects to", "room"),
    ]
    schema = assemble_schema(triplets)
    assert schema.concepts["Campus"].layer_id == 4
    assert schema.concepts["Building"].layer_id == 3
    assert verify_schema(schema).valid


@pytest.mark.parametrize("env", ["home", "hospital", "airport"])
def test_pipeline_converges_with_builtin_mocks(env):
    trace = run_pipeline(env, builtin_mock_backend(env), max_iterations=3)
    assert trace.succeeded
    assert len(trace.iterations) == 1
    assert verify_schema(trace.final).valid


def test_pipeline_two_stage_mock_recovers_from_missing_object():
    replies = {
        "env_description": [
            "Text: rooms connect to entrances.",
            "Text: rooms hold objects and connect to entrances; entrances sit near objects.",
        ],
        "triplet_extraction": [
            "Triplets:\n[room, connects, entrance]",
            "Triplets:\n[room, contains, object]\n[room, connects, entrance]\n[entrance, is near, object]",
        ],
        "triplet_canonicalisation": [
            "Answer: [room, connects to, entrance]",
            "Answer: [room, contains, object]",
            "Answer: [room, connects to, entrance]",
            "Answer: [entrance, is near, object]",
        ],
    }
    trace = run_pipeline("home", MockChatBackend(replies), max_iterations=3)
    assert trace.succeeded
    assert len(trace.iterations) == 2
    first = trace.iterations[0].report
    assert not first.valid
    assert any(m.startswith("R1") for m in first.messages)


def test_pipeline_budget_zero_rejected():
    with pytest.raises(ValueError):
        run_pipeline("home", builtin_mock_backend("home"), max_iterations=0)


def test_pipeline_exhausts_budget_and_reports_failure():
    replies = {
        "env_description": "Text: nothing structured.",
        "triplet_extraction": "no triplets at all",
        "triplet_canonicalisation": "Answer: invalid",
    }
    trace = run_pipeline("void", MockChatBackend(replies), max_iterations=2)
    assert not trace.succeeded
    assert len(trace.iterations) == 2
    assert trace_to_json(trace)


def test_pipeline_deterministic_under_mock():
    one = run_pipeline("home", builtin_mock_backend("home"))
    two = run_pipeline("home", builtin_mock_backend("home"))
    assert trace_to_json(one) == trace_to_json(two)
    assert one.final.concepts == two.final.concepts
