import pytest

from d2tforge.schema import (
    SchemaError,
    StructuredExample,
    load_examples,
    load_schema,
    save_examples,
    validate,
)

WEATHER_SCHEMA = """\
arg temperature NUMBER CARDINAL
arg location STRING ENTITY(City)
intent WEATHER.CURRENT_TEMP temperature,location
"""


def test_weather_schema_loads():
    schema = load_schema(WEATHER_SCHEMA)
    assert len(schema.args) == 2
    assert len(schema.intents) == 1
    assert schema.args_by_name["temperature"].kind == "NUMBER"
    assert schema.args_by_name["location"].entity_type == "City"
    assert schema.intents[0].key == "WEATHER.CURRENT_TEMP"


def test_indices_follow_declaration_order():
    schema = load_schema(WEATHER_SCHEMA)
    assert schema.args_by_name["temperature"].arg_index == 0
    assert schema.args_by_name["location"].arg_index == 1
    # distinct (kind, annotation) pairs get distinct type indices
    assert schema.args_by_name["temperature"].type_index == 0
    assert schema.args_by_name["location"].type_index == 1


def test_duplicate_argument_name_rejected():
    doc = "arg date STRING DATE\narg date STRING PLAIN\n"
    with pytest.raises(SchemaError, match="duplicate argument"):
        load_schema(doc)


def test_dangling_intent_reference_rejected():
    doc = "arg a STRING PLAIN\nintent X.Y a,missing\n"
    with pytest.raises(SchemaError, match="unknown argument"):
        load_schema(doc)


def test_enum_without_values_rejected():
    with pytest.raises(SchemaError):
        load_schema("arg mode ENUM PLAIN\n")


def test_boolean_desugars_to_two_value_enum():
    schema = load_schema("arg flag BOOLEAN PLAIN\n")
    spec = schema.args_by_name["flag"]
    assert spec.kind == "ENUM"
    assert len(spec.enum_values) == 2


def test_movie_layout_arg_indices(movie_schema):
    got = {a.name: a.arg_index for a in movie_schema.args}
    assert got == {
        "num_tickets": 4,
        "theatre": 5,
        "time": 7,
        "domain": 30,
        "intent": 31,
        "num_slots": 32,
    }


def test_type_index_consistent_for_identical_kind_annotation(movie_schema):
    args = movie_schema.args_by_name
    assert args["num_tickets"].type_index == args["num_slots"].type_index
    assert args["domain"].type_index == args["intent"].type_index
    assert args["theatre"].type_index != args["time"].type_index


def test_load_is_deterministic(movie_schema):
    from tests.conftest import MOVIE_SCHEMA_TEXT

    again = load_schema(MOVIE_SCHEMA_TEXT)
    assert again.args == movie_schema.args
    assert again.intents == movie_schema.intents
    assert again.digest() == movie_schema.digest()


def test_digest_changes_with_content(movie_schema):
    other = load_schema(WEATHER_SCHEMA)
    assert other.digest() != movie_schema.digest()


def test_canonical_text_round_trips(movie_schema):
    again = load_schema(movie_schema.canonical_text())
    assert again.digest() == movie_schema.digest()


def test_validate_ok(movie_schema, movie_example):
    assert validate(movie_example, movie_schema) == []


def test_validate_enum_outside_values(movie_schema, movie_example):
    movie_example.values["domain"] = "OPERA"
    violations = validate(movie_example, movie_schema)
    assert len(violations) == 1
    assert "domain" in violations[0]


def test_validate_reports_every_violation(movie_schema, movie_example):
    # two independent defects by hand: drop a required arg, break a NUMBER
    del movie_example.values["theatre"]
    movie_example.values["num_tickets"] = "four"
    violations = validate(movie_example, movie_schema)
    assert len(violations) == 2
    assert any("theatre" in v for v in violations)
    assert any("num_tickets" in v for v in violations)


def test_examples_compare_equal_regardless_of_value_order():
    a = StructuredExample("D", "I", values={"x": "1", "y": "2"})
    b = StructuredExample("D", "I", values={"y": "2", "x": "1"})
    assert a == b


def test_example_jsonl_round_trip(tmp_path, movie_example):
    movie_example.localized_values["theatre"] = "Century 16"
    path = tmp_path / "examples.jsonl"
    save_examples([movie_example], path)
    assert load_examples(path) == [movie_example]
