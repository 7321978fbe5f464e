import json

import pytest

from scenenav.schema import (
    ConceptKind,
    EdgeKind,
    SchemaParseError,
    builtin_schema,
    layers_of,
    parse_schema,
    serialize_schema,
    verify_schema,
)

LISTINGS = [
    "home",
    "studio",
    "supermarket",
    "office",
    "mall",
    "apartment",
    "hospital",
    "airport",
]


def home_doc() -> dict:
    from importlib import resources

    ref = resources.files("scenenav.assets.schemas").joinpath("home.json")
    return json.loads(ref.read_text(encoding="utf-8"))


def test_parse_home_listing():
    schema = builtin_schema("home")
    assert len(schema.concepts) == 6
    assert schema.num_layers == 3
    assert schema.concepts["Entrance"].kind is ConceptKind.CONNECTOR
    assert schema.concepts["Object"].kind is ConceptKind.OBJECT_ROLE


def test_parse_minimal_object_only():
    schema = parse_schema('{"Object": {"layer_id": 1}}')
    assert len(schema.concepts) == 1
    assert schema.num_layers == 1
    report = verify_schema(schema)
    assert not report.valid
    assert any(m.startswith("R9") for m in report.messages)


def test_parse_duplicate_key_is_error():
    doc = '{"Room": {"layer_id": 2, "layer_type": "Place"}, "Room": {"layer_id": 2, "layer_type": "Place"}}'
    with pytest.raises(SchemaParseError, match="duplicate"):
        parse_schema(doc)


def test_parse_rejects_unknown_fields():
    with pytest.raises(SchemaParseError, match="unrecognized"):
        parse_schema('{"Object": {"layer_id": 1, "colour": "blue"}}')


def test_parse_rejects_unknown_layer_type():
    with pytest.raises(SchemaParseError, match="layer_type"):
        parse_schema('{"Zone": {"layer_id": 2, "layer_type": "Area"}}')


def test_place_object_rules_normalise_to_has():
    schema = builtin_schema("supermarket")
    aisle = schema.concepts["Aisle"]
    assert aisle.targets(EdgeKind.HAS) == ("Object",)
    assert aisle.targets(EdgeKind.CONTAINS) == ()
    stairs = builtin_schema("home").concepts["Stairs"]
    assert stairs.targets(EdgeKind.HAS) == ("Object",)


@pytest.mark.parametrize("name", LISTINGS)
def test_all_bundled_listings_verify_valid(name):
    report = verify_schema(builtin_schema(name))
    assert report.valid, f"{name}: {report.messages}"


@pytest.mark.parametrize("name", LISTINGS)
def test_verify_is_deterministic_and_idempotent(name):
    schema = builtin_schema(name)
    first = verify_schema(schema)
    second = verify_schema(schema)
    assert first.messages == second.messages
    assert first.valid == second.valid


def test_layers_of_home():
    assert layers_of(builtin_schema("home")) == [
        (1, ["Object"]),
        (2, ["Room", "Corridor", "Stairs", "Entrance"]),
        (3, ["Floor"]),
    ]


def test_layers_of_airport():
    assert layers_of(builtin_schema("airport")) == [
        (1, ["Object"]),
        (2, ["Gate"]),
        (3, ["Terminal"]),
    ]


def test_layers_of_supermarket():
    assert layers_of(builtin_schema("supermarket")) == [
        (1, ["Object"]),
        (2, ["Aisle"]),
    ]


def test_roundtrip_parse_serialize_parse():
    for name in LISTINGS:
        schema = builtin_schema(name)
        again = parse_schema(serialize_schema(schema))
        assert again == schema, name


def _verify_mutation(doc: dict) -> list[str]:
    return verify_schema(parse_schema(json.dumps(doc))).messages


def _rules_cited(messages: list[str]) -> set[str]:
    return {m.split(":", 1)[0] for m in messages}


def test_mutation_r1_second_object_concept():
    doc = home_doc()
    doc["Item"] = {"layer_id": 1}
    assert _rules_cited(_verify_mutation(doc)) == {"R1"}


def test_mutation_r2_connector_off_layer():
    doc = home_doc()
    doc["Entrance"]["layer_id"] = 3
    assert _rules_cited(_verify_mutation(doc)) == {"R2"}


def test_mutation_r3_region_below_layer_three():
    doc = home_doc()
    doc["Wing"] = {"layer_type": "Region", "layer_id": 2}
    assert _rules_cited(_verify_mutation(doc)) == {"R3"}


def test_mutation_r4_contains_wrong_kind():
    doc = home_doc()
    doc["Floor"]["contains"] = ["Room", "Entrance"]
    assert _rules_cited(_verify_mutation(doc)) == {"R4"}


def test_mutation_r5_has_toward_place():
    doc = home_doc()
    doc["Room"]["has"] = ["Corridor"]
    messages = _verify_mutation(doc)
    assert _rules_cited(messages) == {"R5"}
    assert any("Room" in m for m in messages)


def test_mutation_r6_is_near_toward_place():
    doc = home_doc()
    doc["Entrance"]["is_near"] = ["Room"]
    assert _rules_cited(_verify_mutation(doc)) == {"R6"}


def test_mutation_r7_connects_to_object():
    doc = home_doc()
    doc["Room"]["connects_to"] = ["Entrance", "Room", "Stairs", "Object"]
    assert _rules_cited(_verify_mutation(doc)) == {"R7"}


def test_mutation_r8_layer_gap():
    doc = home_doc()
    doc["Campus"] = {"layer_type": "Region", "layer_id": 5}
    assert _rules_cited(_verify_mutation(doc)) == {"R8"}


def test_mutation_r9_no_place():
    doc = {"Object": home_doc()["Object"]}
    assert _rules_cited(_verify_mutation(doc)) == {"R9"}


def test_verifier_collects_multiple_violations():
    doc = home_doc()
    doc["Room"]["has"] = ["Corridor"]
    doc["Entrance"]["is_near"] = ["Room"]
    assert _rules_cited(_verify_mutation(doc)) == {"R5", "R6"}


def test_resolve_tolerates_plural_references():
    schema = builtin_schema("office")
    floor = schema.concepts["Floor"]
    assert floor.targets(EdgeKind.CONNECTS_TO) == ("Stairs",)
    assert schema.resolve("Stairs") is schema.concepts["Stair"]
    assert verify_schema(schema).valid
