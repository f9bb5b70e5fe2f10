from pathlib import Path

import pytest

from conftest import parse_ok
from flowkit.lang import load_model
from flowkit.model import legal_successors
from flowkit.validate import errors, validate

FIXTURES = Path(__file__).parent / "fixtures"
RULES = ["W1", "W2", "W3", "W4", "W5", "W6", "W7", "W8"]


def fixture_diags(code):
    (path,) = FIXTURES.glob(f"{code.lower()}_*.fm")
    model, parse_diags = load_model(path)
    assert parse_diags == []
    return validate(model)


@pytest.mark.parametrize("code", RULES)
def test_each_rule_has_a_seeded_violation(code):
    diags = fixture_diags(code)
    assert [d.code for d in errors(diags)] == [code]


def test_process_to_create_is_one_w1_error():
    diags = fixture_diags("W1")
    assert len(diags) == 1 and diags[0].is_error


def test_state_flowsystem_with_release_is_one_w3_error():
    assert len(fixture_diags("W3")) == 1


def test_corpus_models_validate_cleanly(corpus):
    for entry in corpus.values():
        assert validate(entry.model) == [], entry.name


def test_corpus_arcs_are_legal_successors(corpus):
    for entry in corpus.values():
        model = entry.model
        for fs in model.flowsystems.values():
            category = model.kinds[fs.kind].category
            for a, b in fs.arcs:
                assert b in legal_successors(a, category)


def test_validate_is_pure_and_sorted():
    model = parse_ok("""
kind Flag: state { value: symbol }
kind D
sphere S {
  flowsystem f: Flag { stages: create, release }
  flowsystem d: D { stages: create, process arcs: process -> create }
}
trigger S.d.process => start S.t
""")
    first, second = validate(model), validate(model)
    assert first == second
    assert [d.sort_key() for d in first] == sorted(d.sort_key() for d in first)
    assert {d.code for d in first} == {"W1", "W3", "W8"}


def test_arrive_without_accept_is_a_warning():
    model = parse_ok("kind D\nsphere S { flowsystem d: D { stages: transfer, arrive } }")
    diags = validate(model)
    assert [(d.severity, d.code) for d in diags] == [("warning", "W1")]


def test_env_reference_must_exist_in_scenarios():
    model = parse_ok("""
kind D { n: int }
sphere S { flowsystem d: D { stages: create, process } }
trigger S.d.process when env.missing > 1 => inject D at S.d with n = 1
scenario a { env other = 1 }
""")
    assert [d.code for d in validate(model)] == ["W5"]


def test_inject_must_set_every_attribute():
    model = parse_ok("""
kind D { n: int, tag: symbol }
sphere S { flowsystem d: D { stages: create, process } }
trigger S.d.process => inject D at S.d with n = 1
""")
    assert [d.code for d in validate(model)] == ["W4"]


def test_timer_duration_needs_positive_lifetime():
    model = parse_ok("""
kind D
sphere S { flowsystem d: D { stages: create } }
timer S.t = 2 * segment_lifetime
scenario bad { env segment_lifetime = 0 }
""")
    assert "W8" in [d.code for d in validate(model)]
