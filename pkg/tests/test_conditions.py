import pytest

from app.core.conditions import Condition, compile_condition, tokenize
from app.core.errors import ConfigError


def test_comparisons_read_the_source_agent():
    cond = Condition('position != "unknown" and fuel >= 2')
    assert cond.evaluate({"position": "52N", "fuel": 3})
    assert not cond.evaluate({"position": "unknown", "fuel": 3})
    assert not cond.evaluate({"position": "52N", "fuel": 1})


def test_destination_scope():
    cond = Condition("not dest.grounded == true")
    assert cond.evaluate({}, {"grounded": False})
    assert not cond.evaluate({}, {"grounded": "true"})
    assert cond.variables() == {("dest", "grounded")}


def test_missing_variable_makes_comparison_false():
    assert not Condition("alert == 1").evaluate({})
    assert not Condition("alert != 1").evaluate({})
    assert Condition("not alert == 1").evaluate({})


def test_bare_name_is_truthiness():
    assert Condition("alert").evaluate({"alert": True})
    assert not Condition("alert").evaluate({"alert": False})
    assert not Condition("alert").evaluate({})


def test_precedence_and_parentheses():
    knowledge = {"a": 1, "b": 0, "c": 1}
    assert Condition("a == 1 or b == 1 and c == 0").evaluate(knowledge)
    assert not Condition("(a == 1 or b == 1) and c == 0").evaluate(knowledge)


def test_mismatched_types_compare_false():
    assert not Condition('fuel > "full"').evaluate({"fuel": 3})


def test_tokens_carry_columns():
    tokens = tokenize("agent.x >= 2.5")
    assert [(t.kind, t.column) for t in tokens] == [("name", 1), ("op", 9), ("number", 12)]


@pytest.mark.parametrize("source", ["a ==", "(a == 1", "a == 1 b", "x.y == 1", "a $ b", "and"])
def test_malformed_conditions_raise_config_error(source):
    with pytest.raises(ConfigError):
        Condition(source)


def test_blank_condition_compiles_to_none():
    assert compile_condition(None) is None
    assert compile_condition("  ") is None
    assert compile_condition("a == 1").source == "a == 1"
